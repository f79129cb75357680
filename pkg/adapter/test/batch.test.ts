import assert from "node:assert/strict";
import { test } from "node:test";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { createPanopticBackend, createSegmenterBackend, MissingWeightsError } from "../src/backends";
import { runPanoptic, runSegmenter } from "../src/batch";
import { GrayImage, writePgm } from "../src/image";
import { readRecords } from "../src/records";

const CREATED = "2026-01-01T00:00:00Z";

function tmpDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "adapter-batch-"));
}

function gradientImage(width: number, height: number): GrayImage {
  const data = new Float64Array(width * height);
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      data[r * width + c] = (r + c) / (width + height - 2);
    }
  }
  return { width, height, data };
}

function flatImage(width: number, height: number, value: number): GrayImage {
  return { width, height, data: new Float64Array(width * height).fill(value) };
}

function job(imagesDir: string, outFile: string, pointsPerSide = 8) {
  return { imagesDir, outFile, pointsPerSide, created: CREATED };
}

test("empty directory produces a header-only record file", () => {
  const dir = tmpDir();
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir);
  const out = path.join(dir, "records.jsonl");
  const result = runSegmenter(job(imagesDir, out), createSegmenterBackend("grid"));
  assert.equal(result.records, 0);
  assert.equal(result.failures, 0);
  const lines = fs.readFileSync(out, "utf-8").trim().split("\n");
  assert.equal(lines.length, 1);
  const header = JSON.parse(lines[0]);
  assert.equal(header.format_version, "1");
  assert.ok(header.producer.length > 0);
  assert.equal(header.created, CREATED);
});

test("one record per image with matching dimensions and granularity", () => {
  const dir = tmpDir();
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir);
  writePgm(path.join(imagesDir, "b.pgm"), gradientImage(24, 16));
  writePgm(path.join(imagesDir, "a.pgm"), gradientImage(12, 20));
  const out = path.join(dir, "records.jsonl");
  const result = runSegmenter(job(imagesDir, out), createSegmenterBackend("grid"));
  assert.equal(result.records, 2);
  const { header, records } = readRecords(out);
  assert.equal(header.model_version, "grid-0.1.0");
  assert.deepEqual(records.map((r) => r.image_id), ["a", "b"]); // sorted
  for (const record of records) {
    assert.equal(record.granularity, 8);
    assert.ok(record.segments.length > 0);
    for (const mask of record.segments) {
      assert.equal(mask.h, record.image_height);
      assert.equal(mask.w, record.image_width);
      assert.equal(mask.counts.reduce((x, y) => x + y, 0), mask.h * mask.w);
    }
  }
});

test("higher points-per-side finds more segments", () => {
  const dir = tmpDir();
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir);
  writePgm(path.join(imagesDir, "img.pgm"), gradientImage(64, 64));
  const coarse = path.join(dir, "coarse.jsonl");
  const fine = path.join(dir, "fine.jsonl");
  runSegmenter(job(imagesDir, coarse, 4), createSegmenterBackend("grid"));
  runSegmenter(job(imagesDir, fine, 32), createSegmenterBackend("grid"));
  const nCoarse = readRecords(coarse).records[0].segments.length;
  const nFine = readRecords(fine).records[0].segments.length;
  assert.ok(nFine > nCoarse, `${nFine} should exceed ${nCoarse}`);
});

test("undecodable images are skipped and listed in the failures file", () => {
  const dir = tmpDir();
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir);
  writePgm(path.join(imagesDir, "good.pgm"), gradientImage(8, 8));
  fs.writeFileSync(path.join(imagesDir, "broken.png"), Buffer.from([0x89, 0x50]));
  const out = path.join(dir, "records.jsonl");
  const result = runSegmenter(job(imagesDir, out), createSegmenterBackend("grid"));
  assert.equal(result.records, 1);
  assert.equal(result.failures, 1);
  assert.ok(result.failuresFile);
  const failures = JSON.parse(fs.readFileSync(result.failuresFile!, "utf-8"));
  assert.equal(failures.failures.length, 1);
  assert.match(failures.failures[0].file, /broken\.png$/);
});

test("re-running yields identical per-image counts", () => {
  const dir = tmpDir();
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir);
  writePgm(path.join(imagesDir, "x.pgm"), gradientImage(32, 24));
  const first = path.join(dir, "first.jsonl");
  const second = path.join(dir, "second.jsonl");
  runSegmenter(job(imagesDir, first), createSegmenterBackend("grid"));
  runSegmenter(job(imagesDir, second), createSegmenterBackend("grid"));
  assert.equal(fs.readFileSync(first, "utf-8"), fs.readFileSync(second, "utf-8"));
});

test("panoptic: flat image yields a valid record with zero instances", () => {
  const dir = tmpDir();
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir);
  writePgm(path.join(imagesDir, "blank.pgm"), flatImage(16, 16, 1.0));
  const out = path.join(dir, "records.jsonl");
  const result = runPanoptic(job(imagesDir, out), createPanopticBackend("grid"));
  assert.equal(result.records, 1);
  const { records } = readRecords(out);
  assert.equal(records[0].class_instances.length, 0);
  assert.equal(records[0].segments.length, 0);
});

test("panoptic: contrasting image yields labeled scored instances", () => {
  const dir = tmpDir();
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir);
  writePgm(path.join(imagesDir, "grad.pgm"), gradientImage(32, 32));
  const out = path.join(dir, "records.jsonl");
  runPanoptic(job(imagesDir, out), createPanopticBackend("grid"));
  const { records } = readRecords(out);
  assert.ok(records[0].class_instances.length > 0);
  for (const instance of records[0].class_instances) {
    assert.match(instance.label, /^tone_\d$/);
    assert.ok(instance.score !== undefined && instance.score >= 0 && instance.score <= 1);
    assert.equal(instance.mask, undefined); // masks only with --with-masks
  }
});

test("panoptic --with-masks attaches image-sized masks", () => {
  const dir = tmpDir();
  const imagesDir = path.join(dir, "images");
  fs.mkdirSync(imagesDir);
  writePgm(path.join(imagesDir, "grad.pgm"), gradientImage(20, 12));
  const out = path.join(dir, "records.jsonl");
  runPanoptic({ ...job(imagesDir, out), withMasks: true }, createPanopticBackend("grid"));
  const { records } = readRecords(out);
  assert.ok(records[0].class_instances.length > 0);
  for (const instance of records[0].class_instances) {
    assert.ok(instance.mask);
    assert.equal(instance.mask!.h, 12);
    assert.equal(instance.mask!.w, 20);
  }
});

test("real backends refuse to run without weights", () => {
  assert.throws(() => createSegmenterBackend("sam"), MissingWeightsError);
  assert.throws(() => createPanopticBackend("fcclip", "/no/such/weights.onnx"),
    MissingWeightsError);
});
