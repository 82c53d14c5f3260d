/** Corpus driver: text lines in, embedding matrix plus row index out. */

import { ExtractConfig, getEncoder, resolveConfig } from "./encoder";
import { writeEmb1 } from "./emb1";
import { EmptyInputError } from "./errors";

export interface ExtractResult {
  buffer: Buffer;
  indexLines: string[];
  warnings: string[];
  rows: number;
  dim: number;
}

interface Item {
  line: number; // 1-based line number in the source text
  text: string;
}

/** Encode every non-empty line; row i of the output matrix corresponds to
 *  index record i, in input order. */
export function encodeCorpus(lines: string[], partial: Partial<ExtractConfig> = {}): ExtractResult {
  const cfg = resolveConfig(partial);
  const items: Item[] = [];
  for (let i = 0; i < lines.length; i++) {
    const text = lines[i].trim();
    if (text.length > 0) items.push({ line: i + 1, text });
  }
  if (items.length === 0) throw new EmptyInputError();

  const encoder = getEncoder(cfg.model, cfg.seed);
  const rows: Float32Array[] = [];
  const indexLines: string[] = [];
  const warnings: string[] = [];

  for (let start = 0; start < items.length; start += cfg.batchSize) {
    const batch = items.slice(start, start + cfg.batchSize);
    for (const item of batch) {
      const { row, truncated } = encoder.encodeRow(item.text, cfg.maxLen, cfg.pooling);
      const record: Record<string, unknown> = {
        row: rows.length,
        line: item.line,
        text: item.text,
      };
      if (truncated) {
        record.truncated = true;
        warnings.push(`line ${item.line} truncated to ${cfg.maxLen} tokens`);
      }
      rows.push(row);
      indexLines.push(JSON.stringify(record));
    }
  }

  return {
    buffer: writeEmb1(rows),
    indexLines,
    warnings,
    rows: rows.length,
    dim: encoder.spec.hidden,
  };
}
