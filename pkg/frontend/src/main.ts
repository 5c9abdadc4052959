#!/usr/bin/env node
/** gocom-plot: render a figure from a gocom metrics.csv.
 *
 *   gocom-plot --csv PATH --kind {accuracy_snr,reward_snr,psnr_snr} --out PATH
 *              [--task T] [--alpha A ...]
 *
 * Output is SVG; identical inputs produce byte-identical files.  Schema
 * violations and empty selections exit nonzero without writing anything.
 */

import { readFileSync, writeFileSync } from 'fs'
import { parseMetricsCsv, SchemaError } from './csv'
import { Filters, Kind, KINDS, renderFigure } from './figures'

interface Args {
  csv: string
  kind: Kind
  out: string
  filters: Filters
}

function usage(): never {
  process.stderr.write(
    'usage: gocom-plot --csv PATH --kind KIND --out PATH [--task T] [--alpha A ...]\n' +
    `  KIND: ${KINDS.join(' | ')}\n`)
  process.exit(2)
}

export function parseArgs(argv: string[]): Args {
  let csv = ''
  let kind = ''
  let out = ''
  const filters: Filters = { alphas: [] }
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i]
    const next = () => {
      if (i + 1 >= argv.length) usage()
      return argv[++i]
    }
    if (a === '--csv') csv = next()
    else if (a === '--kind') kind = next()
    else if (a === '--out') out = next()
    else if (a === '--task') filters.task = next()
    else if (a === '--alpha') {
      const v = Number(next())
      if (Number.isNaN(v)) usage()
      filters.alphas!.push(v)
    } else usage()
  }
  if (!csv || !out || !KINDS.includes(kind as Kind)) usage()
  return { csv, kind: kind as Kind, out, filters }
}

export function main(argv: string[]): number {
  const args = parseArgs(argv)
  let text: string
  try {
    text = readFileSync(args.csv, 'utf8')
  } catch (e) {
    process.stderr.write(`error: cannot read ${args.csv}: ${(e as Error).message}\n`)
    return 1
  }
  try {
    const rows = parseMetricsCsv(text)
    const svg = renderFigure(rows, args.kind, args.filters)
    writeFileSync(args.out, svg)
  } catch (e) {
    if (e instanceof SchemaError) {
      process.stderr.write(`error: ${e.message}\n`)
      return 1
    }
    throw e
  }
  return 0
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)))
}
