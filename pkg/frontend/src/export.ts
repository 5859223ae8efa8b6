import { loadDataset, recordText, type DatasetFormat } from './dataset.js'
import { DEFAULT_MODEL, transformersEncoder, type Encoder } from './encoder.js'
import { LcgeWriter } from './lcge.js'

export interface ExportOptions {
  datasetPath: string
  outPath: string
  format?: DatasetFormat
  modelName?: string
  batchSize?: number
  /** Width the caller expects; a different encoder width only warns. */
  expectedDim?: number
  /** Injectable encoder (tests); defaults to the transformers.js model. */
  encoder?: Encoder
  warn?: (message: string) => void
}

export interface ExportResult {
  count: number
  dim: number
  outPath: string
  model: string
}

/**
 * Encode every record (instruction + " " + input) and write an LCGE file
 * whose header carries the dataset's SHA-256, so the consuming pipeline
 * can refuse mismatched pairs.
 */
export async function exportEmbeddings(options: ExportOptions): Promise<ExportResult> {
  const batchSize = options.batchSize ?? 32
  if (batchSize < 1) throw new Error(`batch size must be >= 1, got ${batchSize}`)
  const expectedDim = options.expectedDim ?? 384
  const warn = options.warn ?? ((message: string) => console.warn(message))

  const dataset = await loadDataset(options.datasetPath, options.format ?? 'jsonl')
  const encoder = options.encoder ?? (await transformersEncoder(options.modelName ?? DEFAULT_MODEL))

  const texts = dataset.records.map(recordText)
  const first = await encoder.encode(texts.slice(0, Math.min(batchSize, texts.length)))
  if (first.length === 0 || first[0].length === 0) {
    throw new Error(`encoder '${encoder.name}' produced no vector for the first batch`)
  }
  const dim = first[0].length
  if (dim !== expectedDim) {
    warn(`encoder '${encoder.name}' produces ${dim}-wide vectors, expected ${expectedDim}; header will say ${dim}`)
  }

  const writer = new LcgeWriter(options.outPath, dataset.records.length, dim, dataset.sourceDigest)
  await writer.open()
  try {
    await writer.writeRows(checkFinite(first, 0))
    for (let start = first.length; start < texts.length; start += batchSize) {
      const rows = await encoder.encode(texts.slice(start, start + batchSize))
      await writer.writeRows(checkFinite(rows, start))
    }
    await writer.close()
  } catch (err) {
    await writer.abort() // no partial files on failure
    throw err
  }
  return { count: dataset.records.length, dim, outPath: options.outPath, model: encoder.name }
}

function checkFinite(rows: Float32Array[], offset: number): Float32Array[] {
  rows.forEach((row, index) => {
    for (const value of row) {
      if (!Number.isFinite(value)) {
        throw new Error(`encoder produced a non-finite value in row ${offset + index}`)
      }
    }
  })
  return rows
}
