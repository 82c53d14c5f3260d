/** Hash-bucket word tokenizer with BERT-style boundary markers. */

export const CLS_ID = 0;
export const SEP_ID = 1;
export const RESERVED_IDS = 2;

export function fnv1a32(text: string): number {
  // standard byte-wise FNV-1a over the UTF-8 encoding
  let h = 0x811c9dc5;
  for (const byte of Buffer.from(text, "utf8")) {
    h ^= byte;
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

export function tokenize(text: string): string[] {
  return text
    .toLowerCase()
    .split(/[^\p{L}\p{N}]+/u)
    .filter((t) => t.length > 0);
}

export interface EncodedSentence {
  ids: number[]; // [CLS] ... [SEP], word ids hashed into the vocab
  truncated: boolean;
}

export function encodeSentence(
  text: string,
  vocabSize: number,
  maxLen: number,
): EncodedSentence {
  const words = tokenize(text);
  const budget = maxLen - RESERVED_IDS; // room for the two markers
  const truncated = words.length > budget;
  const kept = truncated ? words.slice(0, budget) : words;
  const ids = [CLS_ID];
  for (const w of kept) {
    ids.push(RESERVED_IDS + (fnv1a32(w) % (vocabSize - RESERVED_IDS)));
  }
  ids.push(SEP_ID);
  return { ids, truncated };
}
