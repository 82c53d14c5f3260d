/** Binary embedding matrix container.
 *
 * Layout: ASCII magic "EMB1", then row count and dimension as u32
 * little-endian, then rows * dim float32 little-endian values in
 * row-major order.
 */

import { BadFormatError } from "./errors";

export const MAGIC = "EMB1";
const HEADER_BYTES = 12;

export function writeEmb1(rows: Float32Array[]): Buffer {
  if (rows.length === 0) throw new BadFormatError("cannot write zero rows");
  const dim = rows[0].length;
  for (const row of rows) {
    if (row.length !== dim) {
      throw new BadFormatError(`inconsistent row length ${row.length}, expected ${dim}`);
    }
  }
  const buf = Buffer.alloc(HEADER_BYTES + rows.length * dim * 4);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(rows.length, 4);
  buf.writeUInt32LE(dim, 8);
  let off = HEADER_BYTES;
  for (const row of rows) {
    for (let j = 0; j < dim; j++) {
      if (!Number.isFinite(row[j])) {
        throw new BadFormatError("rows must contain only finite values");
      }
      buf.writeFloatLE(row[j], off);
      off += 4;
    }
  }
  return buf;
}

export function parseEmb1(buf: Buffer): { rows: number; dim: number; data: Float32Array } {
  if (buf.length < HEADER_BYTES) {
    throw new BadFormatError(`file too short for header: ${buf.length} bytes`);
  }
  const magic = buf.toString("ascii", 0, 4);
  if (magic !== MAGIC) {
    throw new BadFormatError(`bad magic ${JSON.stringify(magic)}`);
  }
  const rows = buf.readUInt32LE(4);
  const dim = buf.readUInt32LE(8);
  const expected = HEADER_BYTES + rows * dim * 4;
  if (buf.length !== expected) {
    throw new BadFormatError(`expected ${expected} bytes for ${rows}x${dim}, got ${buf.length}`);
  }
  const data = new Float32Array(rows * dim);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(HEADER_BYTES + i * 4);
  }
  return { rows, dim, data };
}
