import { createHash } from "node:crypto";

/** A text encoder maps descriptions to unit-norm embedding vectors. */
export interface TextEncoder {
  readonly id: string;
  readonly dim: number;
  embed(texts: string[]): Promise<number[][]>;
}

/** Raised when the requested encoder cannot be loaded (CLI exit code 1). */
export class EncoderLoadError extends Error {}

/**
 * Deterministic, dependency-free stand-in encoder.
 *
 * Each coordinate is derived from counter-mode SHA-256 over the description,
 * mapped into [-1, 1) and normalized. Purely integer-derived arithmetic, so
 * the output is byte-stable for a fixed version string.
 */
export class HashedEncoder implements TextEncoder {
  static readonly VERSION = "hashed-v1";
  readonly id: string;

  constructor(readonly dim: number = 512) {
    if (!Number.isInteger(dim) || dim < 2) {
      throw new EncoderLoadError(`hashed encoder dimension must be an integer >= 2, got ${dim}`);
    }
    this.id = `hashed:${dim}`;
  }

  private coords(text: string): Float64Array {
    const out = new Float64Array(this.dim);
    let filled = 0;
    for (let block = 0; filled < this.dim; block++) {
      const digest = createHash("sha256")
        .update(`${HashedEncoder.VERSION}|${this.dim}|${block}|${text}`)
        .digest();
      for (let off = 0; off + 8 <= digest.length && filled < this.dim; off += 8) {
        const raw = digest.readBigUInt64BE(off);
        out[filled++] = Number(raw >> 11n) / 2 ** 52 - 1.0; // [-1, 1)
      }
    }
    return out;
  }

  async embed(texts: string[]): Promise<number[][]> {
    return texts.map((text) => {
      const v = this.coords(text);
      let norm = 0;
      for (const x of v) norm += x * x;
      norm = Math.sqrt(norm);
      return Array.from(v, (x) => x / norm);
    });
  }
}

/** Wrapper over a transformers.js feature-extraction pipeline, when present. */
class PipelineEncoder implements TextEncoder {
  constructor(
    readonly id: string,
    readonly dim: number,
    private readonly pipe: (text: string, opts: object) => Promise<{ data: Iterable<number> }>,
  ) {}

  async embed(texts: string[]): Promise<number[][]> {
    const rows: number[][] = [];
    for (const text of texts) {
      const output = await this.pipe(text, { pooling: "mean", normalize: true });
      rows.push(Array.from(output.data));
    }
    return rows;
  }
}

/**
 * Resolve an encoder identifier.
 *
 * "hashed" or "hashed:<dim>" selects the built-in deterministic encoder; any
 * other identifier is treated as a pretrained model name for the optional
 * `@huggingface/transformers` runtime. Load failures raise EncoderLoadError.
 */
export async function resolveEncoder(id: string): Promise<TextEncoder> {
  if (id === "hashed") return new HashedEncoder();
  const match = /^hashed:(\d+)$/.exec(id);
  if (match) return new HashedEncoder(Number(match[1]));

  let pipelineFactory: (task: string, model: string) => Promise<unknown>;
  try {
    const mod = (await import("@huggingface/transformers")) as {
      pipeline: (task: string, model: string) => Promise<unknown>;
    };
    pipelineFactory = mod.pipeline;
  } catch (err) {
    throw new EncoderLoadError(
      `encoder "${id}" requires the optional @huggingface/transformers runtime: ${(err as Error).message}`,
    );
  }
  try {
    const pipe = (await pipelineFactory("feature-extraction", id)) as (
      text: string,
      opts: object,
    ) => Promise<{ data: Iterable<number> }>;
    const probe = await pipe("probe", { pooling: "mean", normalize: true });
    const dim = Array.from(probe.data).length;
    return new PipelineEncoder(id, dim, pipe);
  } catch (err) {
    throw new EncoderLoadError(`failed to load encoder ${id}: ${(err as Error).message}`);
  }
}
