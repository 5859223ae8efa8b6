export interface Encoder {
  readonly name: string
  /** Encode a batch of texts into fixed-width vectors, one per text. */
  encode(texts: string[]): Promise<Float32Array[]>
}

export const DEFAULT_MODEL = 'Xenova/all-MiniLM-L6-v2'

/**
 * Sentence-transformer encoder backed by transformers.js. Vectors are the
 * attention-mask-weighted mean over the final hidden states, un-normalized;
 * the consuming pipeline decides whether to L2-normalize.
 */
export async function transformersEncoder(modelName: string = DEFAULT_MODEL): Promise<Encoder> {
  let pipeline: (typeof import('@xenova/transformers'))['pipeline']
  try {
    ;({ pipeline } = await import('@xenova/transformers'))
  } catch {
    throw new Error(
      "the '@xenova/transformers' optional dependency is not installed; " +
        'run `npm install @xenova/transformers` to enable real encoders',
    )
  }
  const extractor = await pipeline('feature-extraction', modelName)
  return {
    name: modelName,
    async encode(texts: string[]): Promise<Float32Array[]> {
      const output = await extractor(texts, { pooling: 'mean', normalize: false })
      const [batch, dim] = output.dims as [number, number]
      const data = output.data as Float32Array
      const rows: Float32Array[] = []
      for (let i = 0; i < batch; i++) {
        rows.push(data.slice(i * dim, (i + 1) * dim))
      }
      return rows
    },
  }
}
