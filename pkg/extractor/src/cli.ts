#!/usr/bin/env node
/** Command-line entry: read a sentences file, write embeddings + index. */

import * as fs from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { MODELS, POOLINGS, Pooling } from "./encoder";
import { encodeCorpus } from "./extract";
import { EmptyInputError } from "./errors";

const EXIT_OK = 0;
const EXIT_INPUT = 2;
const EXIT_USAGE = 64;

export async function main(argv: string[]): Promise<number> {
  let usageError = false;
  const parser = yargs(argv)
    .scriptName("extract")
    .usage("$0 --input sentences.txt --output emb.bin --index index.jsonl")
    .option("input", { type: "string", demandOption: true, describe: "text file, one sentence per line" })
    .option("output", { type: "string", demandOption: true, describe: "embedding matrix destination" })
    .option("index", { type: "string", demandOption: true, describe: "JSONL row index destination" })
    .option("pooling", {
      type: "string",
      choices: POOLINGS as unknown as string[],
      default: "mean_second_to_last",
      describe: "sentence vector pooling strategy",
    })
    .option("max-len", { type: "number", default: 128, describe: "token budget per sentence" })
    .option("batch-size", { type: "number", default: 32, describe: "sentences encoded per batch" })
    .option("model", {
      type: "string",
      choices: Object.keys(MODELS),
      default: "bert-base",
      describe: "encoder architecture",
    })
    .option("seed", { type: "number", default: 0, describe: "weight generator seed" })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      usageError = true;
      process.stderr.write(`error: ${msg ?? err?.message}\n`);
    })
    .help();

  const args = await parser.parse();
  if (usageError) return EXIT_USAGE;
  if (args.help) return EXIT_OK;

  let text: string;
  try {
    text = fs.readFileSync(args.input as string, "utf8");
  } catch (err) {
    process.stderr.write(`error: cannot read ${args.input}: ${(err as Error).message}\n`);
    return EXIT_INPUT;
  }

  try {
    const result = encodeCorpus(text.split("\n"), {
      pooling: args.pooling as Pooling,
      maxLen: args["max-len"] as number,
      batchSize: args["batch-size"] as number,
      model: args.model as string,
      seed: args.seed as number,
    });
    for (const warning of result.warnings) {
      console.warn(`warning: ${warning}`);
    }
    fs.writeFileSync(args.output as string, result.buffer);
    fs.writeFileSync(args.index as string, result.indexLines.join("\n") + "\n");
    console.log(`wrote ${result.rows} rows of dim ${result.dim} to ${args.output}`);
    return EXIT_OK;
  } catch (err) {
    if (err instanceof EmptyInputError) {
      process.stderr.write(`error: ${err.message}\n`);
      return EXIT_INPUT;
    }
    if (err instanceof Error && /unknown model|pooling must|maxLen must|batchSize must/.test(err.message)) {
      process.stderr.write(`error: ${err.message}\n`);
      return EXIT_USAGE;
    }
    throw err;
  }
}

if (require.main === module) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
