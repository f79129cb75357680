/**
 * Uncompressed run-length mask codec matching the interchange format:
 * runs alternate background/foreground over pixels in column-major order,
 * and the first run counts background pixels (possibly zero). Canonical
 * encodings contain no other zero-length runs and sum to h*w.
 */

export interface RunLengthMask {
  h: number;
  w: number;
  counts: number[];
}

/** Encode a row-major boolean buffer (index = row * width + col). */
export function encodeRle(foreground: Uint8Array, height: number, width: number): RunLengthMask {
  if (height < 1 || width < 1 || foreground.length !== height * width) {
    throw new Error(`mask buffer is ${foreground.length} px, expected ${height}x${width}`);
  }
  const counts: number[] = [];
  let current = 0; // background first
  let run = 0;
  for (let col = 0; col < width; col++) {
    for (let row = 0; row < height; row++) {
      const value = foreground[row * width + col] ? 1 : 0;
      if (value === current) {
        run++;
      } else {
        counts.push(run);
        current = value;
        run = 1;
      }
    }
  }
  counts.push(run);
  return { h: height, w: width, counts };
}

/** Decode back to a row-major boolean buffer; used for round-trip checks. */
export function decodeRle(mask: RunLengthMask): Uint8Array {
  const { h, w, counts } = mask;
  const total = counts.reduce((a, b) => a + b, 0);
  if (total !== h * w) {
    throw new Error(`run lengths sum to ${total}, expected ${h}x${w}=${h * w}`);
  }
  const out = new Uint8Array(h * w);
  let pixel = 0;
  for (let i = 0; i < counts.length; i++) {
    const value = i % 2;
    for (let n = 0; n < counts[i]; n++) {
      const row = pixel % h;
      const col = Math.floor(pixel / h);
      out[row * w + col] = value;
      pixel++;
    }
  }
  return out;
}

export function maskArea(mask: RunLengthMask): number {
  let area = 0;
  for (let i = 1; i < mask.counts.length; i += 2) area += mask.counts[i];
  return area;
}
