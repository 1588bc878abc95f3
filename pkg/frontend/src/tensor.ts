/**
 * Binary tensor interchange format shared with the core.
 *
 * Layout (little endian): magic "TPTN", version u32, rank u32,
 * dims u32 x rank, dtype u8 (0 = f32, 1 = u8, 2 = i32), then the
 * row-major payload.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const MAGIC = "TPTN";
export const VERSION = 1;

export type TensorData = Float32Array | Uint8Array | Int32Array;

export interface Tensor {
  shape: number[];
  dtype: "f32" | "u8" | "i32";
  data: TensorData;
}

export class TensorFormatError extends Error {}

const DTYPE_CODES: Record<Tensor["dtype"], number> = { f32: 0, u8: 1, i32: 2 };
const CODE_DTYPES: Record<number, Tensor["dtype"]> = { 0: "f32", 1: "u8", 2: "i32" };
const ELEMENT_BYTES: Record<Tensor["dtype"], number> = { f32: 4, u8: 1, i32: 4 };

export function tensor(shape: number[], dtype: Tensor["dtype"], data?: TensorData): Tensor {
  const n = shape.reduce((a, b) => a * b, 1);
  if (data === undefined) {
    data = dtype === "f32" ? new Float32Array(n) : dtype === "u8" ? new Uint8Array(n) : new Int32Array(n);
  }
  if (data.length !== n) {
    throw new TensorFormatError(`data length ${data.length} does not match shape [${shape}]`);
  }
  return { shape: [...shape], dtype, data };
}

export function encodeTensor(t: Tensor): Buffer {
  const headerBytes = 4 + 4 + 4 + 4 * t.shape.length + 1;
  const payloadBytes = t.data.length * ELEMENT_BYTES[t.dtype];
  const buf = Buffer.alloc(headerBytes + payloadBytes);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(t.shape.length, 8);
  t.shape.forEach((d, i) => buf.writeUInt32LE(d, 12 + 4 * i));
  buf.writeUInt8(DTYPE_CODES[t.dtype], 12 + 4 * t.shape.length);
  Buffer.from(t.data.buffer, t.data.byteOffset, payloadBytes).copy(buf, headerBytes);
  return buf;
}

export function decodeTensor(buf: Buffer): Tensor {
  if (buf.length < 4 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new TensorFormatError("bad magic at offset 0");
  }
  if (buf.length < 12) throw new TensorFormatError("truncated header");
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new TensorFormatError(`unsupported version ${version}`);
  const rank = buf.readUInt32LE(8);
  if (buf.length < 12 + 4 * rank + 1) throw new TensorFormatError("truncated header");
  const shape: number[] = [];
  for (let i = 0; i < rank; i++) shape.push(buf.readUInt32LE(12 + 4 * i));
  const code = buf.readUInt8(12 + 4 * rank);
  const dtype = CODE_DTYPES[code];
  if (dtype === undefined) throw new TensorFormatError(`unknown dtype code ${code}`);
  const n = shape.reduce((a, b) => a * b, 1);
  const start = 12 + 4 * rank + 1;
  const payloadBytes = n * ELEMENT_BYTES[dtype];
  if (buf.length < start + payloadBytes) throw new TensorFormatError("truncated payload");
  // copy so the typed array is aligned and detached from the file buffer
  const payload = Buffer.alloc(payloadBytes);
  buf.copy(payload, 0, start, start + payloadBytes);
  const data =
    dtype === "f32"
      ? new Float32Array(payload.buffer, 0, n)
      : dtype === "u8"
        ? new Uint8Array(payload.buffer, 0, n)
        : new Int32Array(payload.buffer, 0, n);
  return { shape, dtype, data };
}

export function readTensor(path: string): Tensor {
  return decodeTensor(readFileSync(path));
}

export function writeTensor(path: string, t: Tensor): void {
  writeFileSync(path, encodeTensor(t));
}
