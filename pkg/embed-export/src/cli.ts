#!/usr/bin/env node
/** CLI: embed-export export --dataset-kind <k> --classes <file> --encoder <id> --out <path>
 *
 * The classes file holds one class name per line (blank lines ignored).
 * Exit codes: 0 success, 1 encoder load failure, 2 invalid arguments/request.
 */

import { readFileSync } from "node:fs";

import { EncoderLoadError } from "./encoder.js";
import { ValidationError } from "./format.js";
import { exportTextEmbeddings } from "./export.js";
import { DATASET_KINDS, isDatasetKind } from "./templates.js";

const USAGE =
  "usage: embed-export export --dataset-kind <kind> --classes <file> --encoder <id> --out <path>\n" +
  `  kinds: ${DATASET_KINDS.join(", ")}\n` +
  '  encoder: "hashed[:dim]" for the built-in deterministic encoder, or a\n' +
  "  pretrained model identifier when @huggingface/transformers is installed";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new ValidationError(`malformed arguments near ${key}`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

export async function main(argv: string[]): Promise<number> {
  try {
    if (argv[0] !== "export") {
      throw new ValidationError(`unknown command ${argv[0] ?? "(none)"}`);
    }
    const flags = parseFlags(argv.slice(1));
    for (const required of ["dataset-kind", "classes", "out"]) {
      if (!flags.has(required)) {
        throw new ValidationError(`missing required flag --${required}`);
      }
    }
    const kind = flags.get("dataset-kind")!;
    if (!isDatasetKind(kind)) {
      throw new ValidationError(`unknown dataset kind ${kind}; expected one of ${DATASET_KINDS.join(", ")}`);
    }
    const classNames = readFileSync(flags.get("classes")!, "utf-8")
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0);
    const { dim } = await exportTextEmbeddings({
      datasetKind: kind,
      classNames,
      encoderId: flags.get("encoder") ?? "hashed:512",
      outputPath: flags.get("out")!,
    });
    console.log(`wrote ${classNames.length} x ${dim} embeddings to ${flags.get("out")}`);
    return 0;
  } catch (err) {
    if (err instanceof EncoderLoadError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    if (err instanceof ValidationError || (err as NodeJS.ErrnoException).code === "ENOENT") {
      console.error(`error: ${(err as Error).message}`);
      console.error(USAGE);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
