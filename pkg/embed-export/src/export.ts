import { writeFile } from "node:fs/promises";

import { resolveEncoder } from "./encoder.js";
import { ClassEmbedding, ValidationError, normalizeRow, serializeEmbeddingFile } from "./format.js";
import { DatasetKind, describeClass } from "./templates.js";

export interface ExportRequest {
  datasetKind: DatasetKind;
  classNames: string[];
  encoderId: string;
  outputPath: string;
}

export function validateClassNames(names: string[]): void {
  if (names.length === 0) {
    throw new ValidationError("class list is empty");
  }
  if (names.some((n) => n.length === 0)) {
    throw new ValidationError("class names must be non-empty");
  }
  if (new Set(names).size !== names.length) {
    throw new ValidationError("duplicate class names in the request");
  }
}

/** Embed every class description and write the interchange file. */
export async function exportTextEmbeddings(req: ExportRequest): Promise<{ dim: number }> {
  validateClassNames(req.classNames);
  const encoder = await resolveEncoder(req.encoderId);
  const descriptions = req.classNames.map((c) => describeClass(req.datasetKind, c));
  const rows = (await encoder.embed(descriptions)).map(normalizeRow);
  const classes: ClassEmbedding[] = req.classNames.map((name, i) => ({
    name,
    description: descriptions[i],
    embedding: rows[i],
  }));
  await writeFile(req.outputPath, serializeEmbeddingFile(encoder.dim, classes), "utf-8");
  return { dim: encoder.dim };
}
