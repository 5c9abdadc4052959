/** Minimal deterministic SVG line-chart builder (no timestamps, fixed style). */

export interface Series {
  label: string
  x: number[]
  y: number[]
  std?: number[]          // drawn as a shaded band when present
  dashed?: boolean        // horizontal reference lines use dashes
}

export interface ChartSpec {
  title: string
  xLabel: string
  yLabel: string
  series: Series[]
}

const W = 760
const H = 500
const MARGIN = { left: 70, right: 180, top: 44, bottom: 56 }
const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b', '#17becf']

const fmt = (v: number): string => {
  const s = v.toFixed(3)
  return s === '-0.000' ? '0.000' : s
}

function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) {
    hi = lo + 1
    lo = lo - 1
  }
  const span = hi - lo
  const step0 = span / Math.max(1, n - 1)
  const mag = Math.pow(10, Math.floor(Math.log10(step0)))
  const norm = step0 / mag
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag
  const first = Math.ceil(lo / step) * step
  const ticks: number[] = []
  for (let v = first; v <= hi + 1e-9; v += step) ticks.push(Math.abs(v) < 1e-12 ? 0 : v)
  return ticks
}

export function renderChart(spec: ChartSpec): string {
  const xs = spec.series.flatMap((s) => s.x)
  const ysAll = spec.series.flatMap((s, i) =>
    s.std ? s.y.flatMap((v, j) => [v - s.std![j], v + s.std![j]]) : s.y)
  let xLo = Math.min(...xs)
  let xHi = Math.max(...xs)
  let yLo = Math.min(...ysAll)
  let yHi = Math.max(...ysAll)
  const pad = (yHi - yLo || 1) * 0.06
  yLo -= pad
  yHi += pad

  const plotW = W - MARGIN.left - MARGIN.right
  const plotH = H - MARGIN.top - MARGIN.bottom
  const px = (v: number) => MARGIN.left + ((v - xLo) / (xHi - xLo || 1)) * plotW
  const py = (v: number) => MARGIN.top + (1 - (v - yLo) / (yHi - yLo || 1)) * plotH

  const parts: string[] = []
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`)
  parts.push(`<rect width="${W}" height="${H}" fill="#ffffff"/>`)
  parts.push(`<text x="${W / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">${spec.title}</text>`)

  // axes + grid
  for (const t of niceTicks(xLo, xHi)) {
    const x = px(t)
    parts.push(`<line x1="${fmt(x)}" y1="${MARGIN.top}" x2="${fmt(x)}" y2="${H - MARGIN.bottom}" stroke="#e0e0e0" stroke-width="1"/>`)
    parts.push(`<text x="${fmt(x)}" y="${H - MARGIN.bottom + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">${t}</text>`)
  }
  for (const t of niceTicks(yLo, yHi)) {
    const y = py(t)
    parts.push(`<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${W - MARGIN.right}" y2="${fmt(y)}" stroke="#e0e0e0" stroke-width="1"/>`)
    parts.push(`<text x="${MARGIN.left - 8}" y="${fmt(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">${Number(t.toPrecision(6))}</text>`)
  }
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333333"/>`)
  parts.push(`<text x="${MARGIN.left + plotW / 2}" y="${H - 12}" text-anchor="middle" font-family="sans-serif" font-size="13">${spec.xLabel}</text>`)
  parts.push(`<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">${spec.yLabel}</text>`)

  spec.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length]
    if (s.std) {
      const upper = s.x.map((v, j) => `${fmt(px(v))},${fmt(py(s.y[j] + s.std![j]))}`)
      const lower = s.x.map((v, j) => `${fmt(px(v))},${fmt(py(s.y[j] - s.std![j]))}`).reverse()
      parts.push(`<polygon points="${upper.concat(lower).join(' ')}" fill="${color}" opacity="0.15"/>`)
    }
    const pts = s.x.map((v, j) => `${fmt(px(v))},${fmt(py(s.y[j]))}`).join(' ')
    const dash = s.dashed ? ' stroke-dasharray="7,5"' : ''
    parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="2"${dash}/>`)
    if (!s.dashed) {
      for (let j = 0; j < s.x.length; j++) {
        parts.push(`<circle cx="${fmt(px(s.x[j]))}" cy="${fmt(py(s.y[j]))}" r="3" fill="${color}"/>`)
      }
    }
    const ly = MARGIN.top + 16 + i * 20
    const lx = W - MARGIN.right + 12
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" stroke="${color}" stroke-width="2"${dash}/>`)
    parts.push(`<text x="${lx + 32}" y="${ly}" font-family="sans-serif" font-size="12">${s.label}</text>`)
  })

  parts.push('</svg>')
  return parts.join('\n') + '\n'
}
