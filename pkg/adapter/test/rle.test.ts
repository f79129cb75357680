import assert from "node:assert/strict";
import { test } from "node:test";

import { decodeRle, encodeRle, maskArea } from "../src/rle";

test("all-background mask is a single run", () => {
  const rle = encodeRle(new Uint8Array(4), 2, 2);
  assert.deepEqual(rle.counts, [4]);
});

test("all-foreground mask starts with a zero run", () => {
  const rle = encodeRle(new Uint8Array([1, 1, 1, 1]), 2, 2);
  assert.deepEqual(rle.counts, [0, 4]);
});

test("runs are counted in column-major order", () => {
  // 3x3 with foreground at (row,col) = (2,0), (0,1), (1,1):
  // column-major pixel indices 2,3,4 -> counts [2,3,4]
  const fg = new Uint8Array(9);
  fg[2 * 3 + 0] = 1;
  fg[0 * 3 + 1] = 1;
  fg[1 * 3 + 1] = 1;
  const rle = encodeRle(fg, 3, 3);
  assert.deepEqual(rle.counts, [2, 3, 4]);
});

test("round-trip over random masks", () => {
  let state = 12345;
  const next = () => (state = (state * 1103515245 + 12345) % 2147483648) / 2147483648;
  for (let iter = 0; iter < 200; iter++) {
    const h = 1 + Math.floor(next() * 20);
    const w = 1 + Math.floor(next() * 20);
    const threshold = next();
    const fg = new Uint8Array(h * w);
    for (let i = 0; i < fg.length; i++) fg[i] = next() < threshold ? 1 : 0;
    const rle = encodeRle(fg, h, w);
    assert.equal(rle.counts.reduce((a, b) => a + b, 0), h * w);
    for (let i = 1; i < rle.counts.length; i++) assert.ok(rle.counts[i] > 0);
    assert.deepEqual(decodeRle(rle), fg);
    assert.equal(maskArea(rle), fg.reduce((a, b) => a + b, 0));
  }
});

test("buffer size mismatch is rejected", () => {
  assert.throws(() => encodeRle(new Uint8Array(5), 2, 2), /expected 2x2/);
});
