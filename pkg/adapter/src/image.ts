/**
 * Minimal image loading for batch inference: binary/ASCII PGM (P5/P2) and
 * binary PPM (P6, converted to Rec.601 luma). Anything else is reported as
 * undecodable and ends up in the failures file rather than aborting the
 * batch.
 */

import * as fs from "fs";

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major intensities in [0, 1]. */
  data: Float64Array;
}

export class UndecodableImageError extends Error {}

function parsePnmHeader(buf: Buffer): {
  magic: string;
  width: number;
  height: number;
  maxval: number;
  offset: number;
} {
  const magic = buf.subarray(0, 2).toString("ascii");
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3 && pos < buf.length) {
    const ch = String.fromCharCode(buf[pos]);
    if (ch === "#") {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      pos++;
    } else if (/\s/.test(ch)) {
      pos++;
    } else {
      let token = "";
      while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) {
        token += String.fromCharCode(buf[pos]);
        pos++;
      }
      const value = Number(token);
      if (!Number.isInteger(value) || value < 0) {
        throw new UndecodableImageError(`bad header token ${JSON.stringify(token)}`);
      }
      fields.push(value);
    }
  }
  if (fields.length < 3) throw new UndecodableImageError("truncated header");
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw new UndecodableImageError(`bad dimensions ${width}x${height} maxval ${maxval}`);
  }
  return { magic, width, height, maxval, offset: pos };
}

function readSamples(
  buf: Buffer,
  offset: number,
  count: number,
  maxval: number,
  ascii: boolean,
): Float64Array {
  const out = new Float64Array(count);
  if (ascii) {
    const tokens = buf
      .subarray(offset)
      .toString("ascii")
      .split(/\s+/)
      .filter((t) => t.length > 0);
    if (tokens.length < count) throw new UndecodableImageError("truncated pixel data");
    for (let i = 0; i < count; i++) out[i] = Number(tokens[i]) / maxval;
    return out;
  }
  const wide = maxval > 255;
  const need = count * (wide ? 2 : 1);
  if (buf.length - offset < need) throw new UndecodableImageError("truncated pixel data");
  for (let i = 0; i < count; i++) {
    out[i] = (wide ? buf.readUInt16BE(offset + 2 * i) : buf[offset + i]) / maxval;
  }
  return out;
}

export function loadGray(path: string): GrayImage {
  let buf: Buffer;
  try {
    buf = fs.readFileSync(path);
  } catch (err) {
    throw new UndecodableImageError(`cannot read ${path}: ${(err as Error).message}`);
  }
  if (buf.length < 2) throw new UndecodableImageError(`${path}: not a PNM file`);
  const magic = buf.subarray(0, 2).toString("ascii");
  if (magic !== "P5" && magic !== "P2" && magic !== "P6") {
    throw new UndecodableImageError(`${path}: unsupported format ${JSON.stringify(magic)}`);
  }
  const { width, height, maxval, offset } = parsePnmHeader(buf);
  const pixels = width * height;
  if (magic === "P6") {
    const rgb = readSamples(buf, offset, pixels * 3, maxval, false);
    const data = new Float64Array(pixels);
    for (let i = 0; i < pixels; i++) {
      data[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    }
    return { width, height, data };
  }
  return {
    width,
    height,
    data: readSamples(buf, offset, pixels, maxval, magic === "P2"),
  };
}

/** Write a binary PGM; handy for fixtures and debugging. */
export function writePgm(path: string, image: GrayImage): void {
  const header = Buffer.from(`P5\n${image.width} ${image.height}\n255\n`, "ascii");
  const body = Buffer.alloc(image.width * image.height);
  for (let i = 0; i < body.length; i++) {
    body[i] = Math.max(0, Math.min(255, Math.round(image.data[i] * 255)));
  }
  fs.writeFileSync(path, Buffer.concat([header, body]));
}
