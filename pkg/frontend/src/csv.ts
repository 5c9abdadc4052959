/** Strict reader for the gocom metrics.csv schema (RFC-4180 quoting). */

export const CSV_COLUMNS = [
  'run_id', 'task', 'system', 'channel', 'alpha', 'train_snr',
  'test_snr_db', 'metric', 'value', 'std', 'repeats',
] as const

export interface MetricsRow {
  run_id: string
  task: string
  system: string
  channel: string
  alpha: number
  train_snr: string
  test_snr_db: number
  metric: string
  value: number
  std: number
  repeats: number
}

export class SchemaError extends Error {}

function splitLine(line: string, lineno: number): string[] {
  const out: string[] = []
  let field = ''
  let quoted = false
  for (let i = 0; i < line.length; i++) {
    const ch = line[i]
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          field += '"'
          i++
        } else {
          quoted = false
        }
      } else {
        field += ch
      }
    } else if (ch === '"') {
      quoted = true
    } else if (ch === ',') {
      out.push(field)
      field = ''
    } else {
      field += ch
    }
  }
  if (quoted) throw new SchemaError(`line ${lineno}: unterminated quote`)
  out.push(field)
  return out
}

function num(raw: string, col: string, lineno: number): number {
  const v = Number(raw)
  if (raw.trim() === '' || Number.isNaN(v)) {
    throw new SchemaError(`line ${lineno}: column ${col} is not a number: ${JSON.stringify(raw)}`)
  }
  return v
}

export function parseMetricsCsv(text: string): MetricsRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0)
  if (lines.length === 0) throw new SchemaError('empty csv')
  const header = splitLine(lines[0], 1)
  if (header.length !== CSV_COLUMNS.length ||
      !CSV_COLUMNS.every((c, i) => header[i] === c)) {
    throw new SchemaError(
      `unexpected header: got [${header.join(', ')}], want [${CSV_COLUMNS.join(', ')}]`)
  }
  const rows: MetricsRow[] = []
  for (let k = 1; k < lines.length; k++) {
    const f = splitLine(lines[k], k + 1)
    if (f.length !== CSV_COLUMNS.length) {
      throw new SchemaError(`line ${k + 1}: expected ${CSV_COLUMNS.length} fields, got ${f.length}`)
    }
    rows.push({
      run_id: f[0], task: f[1], system: f[2], channel: f[3],
      alpha: num(f[4], 'alpha', k + 1),
      train_snr: f[5],
      test_snr_db: num(f[6], 'test_snr_db', k + 1),
      metric: f[7],
      value: num(f[8], 'value', k + 1),
      std: num(f[9], 'std', k + 1),
      repeats: num(f[10], 'repeats', k + 1),
    })
  }
  return rows
}
