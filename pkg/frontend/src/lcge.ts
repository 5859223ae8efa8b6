import { open, readFile, unlink } from 'node:fs/promises'
import type { FileHandle } from 'node:fs/promises'

export const LCGE_MAGIC = 'LCGE'
export const LCGE_VERSION = 1
export const HEADER_BYTES = 48 // magic(4) + version(4) + count(4) + dim(4) + sha256(32)

/**
 * Streams an LCGE file in one sequential pass: header first, then float32
 * rows in record order, always little-endian regardless of host byte order.
 */
export class LcgeWriter {
  private handle: FileHandle | null = null
  private rowsWritten = 0

  constructor(
    private readonly path: string,
    private readonly count: number,
    private readonly dim: number,
    private readonly digest: Buffer,
  ) {
    if (digest.length !== 32) throw new Error(`source digest must be 32 bytes, got ${digest.length}`)
  }

  async open(): Promise<void> {
    const header = Buffer.alloc(HEADER_BYTES)
    header.write(LCGE_MAGIC, 0, 'ascii')
    header.writeUInt32LE(LCGE_VERSION, 4)
    header.writeUInt32LE(this.count, 8)
    header.writeUInt32LE(this.dim, 12)
    this.digest.copy(header, 16)
    this.handle = await open(this.path, 'w')
    await this.handle.write(header)
  }

  async writeRows(rows: Float32Array[]): Promise<void> {
    if (!this.handle) throw new Error('writer is not open')
    for (const row of rows) {
      if (row.length !== this.dim) {
        throw new Error(`row ${this.rowsWritten} has width ${row.length}, expected ${this.dim}`)
      }
      const buf = Buffer.alloc(this.dim * 4)
      for (let j = 0; j < this.dim; j++) buf.writeFloatLE(row[j], j * 4)
      await this.handle.write(buf)
      this.rowsWritten += 1
    }
  }

  async close(): Promise<void> {
    if (!this.handle) return
    await this.handle.close()
    this.handle = null
    if (this.rowsWritten !== this.count) {
      throw new Error(`wrote ${this.rowsWritten} rows, header promised ${this.count}`)
    }
  }

  /** Tear down after a failure: close and remove the partial file. */
  async abort(): Promise<void> {
    if (this.handle) {
      await this.handle.close().catch(() => undefined)
      this.handle = null
    }
    await unlink(this.path).catch(() => undefined)
  }
}

export interface LcgeFile {
  version: number
  count: number
  dim: number
  digest: Buffer
  /** Row-major float32 payload, length count * dim. */
  values: Float32Array
}

/** Test-oriented reader: parses a whole LCGE file back into memory. */
export async function readLcge(path: string): Promise<LcgeFile> {
  const raw = await readFile(path)
  if (raw.length < HEADER_BYTES) throw new Error(`${path}: truncated header`)
  if (raw.toString('ascii', 0, 4) !== LCGE_MAGIC) throw new Error(`${path}: bad magic`)
  const version = raw.readUInt32LE(4)
  const count = raw.readUInt32LE(8)
  const dim = raw.readUInt32LE(12)
  const digest = Buffer.from(raw.subarray(16, 48))
  const expected = HEADER_BYTES + count * dim * 4
  if (raw.length !== expected) {
    throw new Error(`${path}: payload is ${raw.length - HEADER_BYTES} bytes, expected ${expected - HEADER_BYTES}`)
  }
  const values = new Float32Array(count * dim)
  for (let i = 0; i < values.length; i++) values[i] = raw.readFloatLE(HEADER_BYTES + i * 4)
  return { version, count, dim, digest, values }
}
