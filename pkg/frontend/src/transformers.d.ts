// Minimal surface of the optional transformers.js dependency, so the
// project compiles whether or not the package is installed.
declare module '@xenova/transformers' {
  export interface FeatureTensor {
    dims: number[]
    data: Float32Array
  }
  export type FeatureExtractor = (
    texts: string[],
    options: { pooling: 'mean' | 'none' | 'cls'; normalize: boolean },
  ) => Promise<FeatureTensor>
  export function pipeline(task: 'feature-extraction', model?: string): Promise<FeatureExtractor>
}
