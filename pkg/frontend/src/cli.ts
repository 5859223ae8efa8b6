#!/usr/bin/env node
import { parseArgs } from 'node:util'

import { DEFAULT_MODEL } from './encoder.js'
import { exportEmbeddings } from './export.js'

const USAGE = `usage: lcge-export <dataset.jsonl> --out <file.lcge> [options]

options:
  --out <path>      output LCGE file (required)
  --model <name>    sentence-transformer checkpoint (default ${DEFAULT_MODEL})
  --format <fmt>    jsonl | json-array (default jsonl)
  --batch <n>       encoder batch size (default 32)
  --dim <n>         expected vector width; mismatch only warns (default 384)
`

async function main(): Promise<number> {
  const { values, positionals } = parseArgs({
    allowPositionals: true,
    options: {
      out: { type: 'string' },
      model: { type: 'string', default: DEFAULT_MODEL },
      format: { type: 'string', default: 'jsonl' },
      batch: { type: 'string', default: '32' },
      dim: { type: 'string', default: '384' },
      help: { type: 'boolean', default: false },
    },
  })
  if (values.help || positionals.length !== 1 || !values.out) {
    process.stderr.write(USAGE)
    return values.help ? 0 : 2
  }
  if (values.format !== 'jsonl' && values.format !== 'json-array') {
    process.stderr.write(`unknown format '${values.format}'\n`)
    return 2
  }
  try {
    const result = await exportEmbeddings({
      datasetPath: positionals[0],
      outPath: values.out,
      format: values.format,
      modelName: values.model,
      batchSize: Number.parseInt(values.batch, 10),
      expectedDim: Number.parseInt(values.dim, 10),
    })
    process.stdout.write(
      `wrote ${result.count} x ${result.dim} embeddings from '${result.model}' to ${result.outPath}\n`,
    )
    return 0
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`)
    return 1
  }
}

main().then((code) => {
  process.exitCode = code
})
