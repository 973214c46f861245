/** Serialization of the embedding interchange file.
 *
 * Contract with the consumer: UTF-8 JSON with `dim` and an ordered `classes`
 * array of {name, description, embedding}; numbers carry >= 9 significant
 * digits; rows unit-normalized before writing. The exact byte layout here is
 * stable so identical requests produce identical files.
 */

export interface ClassEmbedding {
  name: string;
  description: string;
  embedding: number[];
}

export class ValidationError extends Error {}

function formatNumber(x: number): string {
  if (!Number.isFinite(x)) {
    throw new ValidationError(`non-finite embedding value: ${x}`);
  }
  return x.toExponential(9);
}

export function normalizeRow(row: number[]): number[] {
  let norm = 0;
  for (const x of row) norm += x * x;
  norm = Math.sqrt(norm);
  if (norm === 0) {
    throw new ValidationError("cannot normalize a zero-norm embedding row");
  }
  return row.map((x) => x / norm);
}

export function serializeEmbeddingFile(dim: number, classes: ClassEmbedding[]): string {
  if (!Number.isInteger(dim) || dim < 2) {
    throw new ValidationError(`dim must be an integer >= 2, got ${dim}`);
  }
  if (classes.length === 0) {
    throw new ValidationError("need at least one class");
  }
  const names = new Set<string>();
  for (const entry of classes) {
    if (!entry.name) throw new ValidationError("class names must be non-empty");
    if (names.has(entry.name)) throw new ValidationError(`duplicate class name: ${entry.name}`);
    names.add(entry.name);
    if (entry.embedding.length !== dim) {
      throw new ValidationError(
        `class ${entry.name}: embedding has ${entry.embedding.length} values, expected ${dim}`,
      );
    }
  }
  const lines: string[] = ["{", `  "dim": ${dim},`, '  "classes": ['];
  classes.forEach((entry, i) => {
    const nums = entry.embedding.map(formatNumber).join(", ");
    const row =
      "    {" +
      `"name": ${JSON.stringify(entry.name)}, ` +
      `"description": ${JSON.stringify(entry.description)}, ` +
      `"embedding": [${nums}]` +
      "}";
    lines.push(row + (i < classes.length - 1 ? "," : ""));
  });
  lines.push("  ]", "}", "");
  return lines.join("\n");
}
