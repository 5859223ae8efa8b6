import { createHash } from 'node:crypto'
import { readFile } from 'node:fs/promises'

export interface InstructionRecord {
  id: number
  instruction: string
  input: string
  output: string
}

export interface Dataset {
  records: InstructionRecord[]
  /** SHA-256 over the raw file bytes; binds embedding files to their source. */
  sourceDigest: Buffer
}

export type DatasetFormat = 'jsonl' | 'json-array'

function coerceRecord(obj: unknown, id: number, where: string): InstructionRecord {
  if (typeof obj !== 'object' || obj === null || Array.isArray(obj)) {
    throw new Error(`${where}: expected an object`)
  }
  const rec = obj as Record<string, unknown>
  const instruction = rec['instruction']
  if (typeof instruction !== 'string' || instruction.trim() === '') {
    throw new Error(`${where}: record ${id} is missing a non-empty 'instruction'`)
  }
  const input = rec['input'] ?? ''
  const output = rec['output'] ?? ''
  if (typeof input !== 'string' || typeof output !== 'string') {
    throw new Error(`${where}: record ${id} has non-string 'input' or 'output'`)
  }
  return { id, instruction, input, output }
}

export async function loadDataset(path: string, format: DatasetFormat = 'jsonl'): Promise<Dataset> {
  let raw: Buffer
  try {
    raw = await readFile(path)
  } catch (err) {
    throw new Error(`cannot read dataset ${path}: ${(err as Error).message}`)
  }
  const sourceDigest = createHash('sha256').update(raw).digest()
  const records: InstructionRecord[] = []

  if (format === 'jsonl') {
    const lines = raw.toString('utf-8').split('\n')
    lines.forEach((line, index) => {
      if (line.trim() === '') return
      let parsed: unknown
      try {
        parsed = JSON.parse(line)
      } catch {
        throw new Error(`${path}: line ${index + 1}: invalid JSON`)
      }
      records.push(coerceRecord(parsed, records.length, `${path}: line ${index + 1}`))
    })
  } else if (format === 'json-array') {
    let parsed: unknown
    try {
      parsed = JSON.parse(raw.toString('utf-8'))
    } catch {
      throw new Error(`${path}: invalid JSON`)
    }
    if (!Array.isArray(parsed)) throw new Error(`${path}: expected a top-level JSON array`)
    parsed.forEach((obj, index) => records.push(coerceRecord(obj, index, path)))
  } else {
    throw new Error(`unknown dataset format '${format as string}'`)
  }

  if (records.length === 0) throw new Error(`${path}: dataset is empty`)
  return { records, sourceDigest }
}

/** The exact text the embedding pipeline consumes for one record. */
export function recordText(record: InstructionRecord): string {
  return record.instruction + ' ' + record.input
}
