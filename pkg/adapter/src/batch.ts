/**
 * Batch runners: walk an image directory in sorted order, run one backend
 * per image, and emit an interchange record file. Undecodable images are
 * skipped, logged, and listed in a machine-readable failures file so a
 * 9600-image batch never fails atomically.
 */

import * as fs from "fs";
import * as path from "path";

import { PanopticBackend, SegmenterBackend } from "./backends";
import { GrayImage, UndecodableImageError, loadGray } from "./image";
import { DatasetHeader, FORMAT_VERSION, SegmentationRecord, writeRecords } from "./records";

export interface InferenceJob {
  imagesDir: string;
  outFile: string;
  pointsPerSide: number;
  created: string;
  withMasks?: boolean;
  failuresFile?: string;
}

export interface BatchResult {
  records: number;
  failures: number;
  failuresFile?: string;
}

interface Failure {
  file: string;
  error: string;
}

function listImages(dir: string): string[] {
  let entries: string[];
  try {
    entries = fs.readdirSync(dir);
  } catch (err) {
    throw new Error(`cannot list images directory ${dir}: ${(err as Error).message}`);
  }
  return entries
    .filter((name) => fs.statSync(path.join(dir, name)).isFile())
    .sort();
}

function imageId(filename: string): string {
  const dot = filename.lastIndexOf(".");
  return dot > 0 ? filename.slice(0, dot) : filename;
}

function writeFailures(job: InferenceJob, failures: Failure[]): string | undefined {
  if (failures.length === 0) return undefined;
  const failuresFile = job.failuresFile ?? job.outFile + ".failures.json";
  fs.writeFileSync(failuresFile, JSON.stringify({ failures }, null, 2) + "\n", "utf-8");
  return failuresFile;
}

function runBatch(
  job: InferenceJob,
  header: DatasetHeader,
  infer: (image: GrayImage, id: string) => SegmentationRecord,
): BatchResult {
  const records: SegmentationRecord[] = [];
  const failures: Failure[] = [];
  const seen = new Set<string>();
  for (const filename of listImages(job.imagesDir)) {
    const file = path.join(job.imagesDir, filename);
    const id = imageId(filename);
    if (seen.has(id)) {
      throw new Error(`duplicate image_id ${id} in ${job.imagesDir}`);
    }
    seen.add(id);
    let image: GrayImage;
    try {
      image = loadGray(file);
    } catch (err) {
      if (err instanceof UndecodableImageError) {
        console.error(`skipping undecodable image ${file}: ${err.message}`);
        failures.push({ file, error: err.message });
        continue;
      }
      throw err;
    }
    records.push(infer(image, id));
  }
  writeRecords(job.outFile, records, header);
  const failuresFile = writeFailures(job, failures);
  return { records: records.length, failures: failures.length, failuresFile };
}

export function runSegmenter(job: InferenceJob, backend: SegmenterBackend): BatchResult {
  const header: DatasetHeader = {
    format_version: FORMAT_VERSION,
    producer: backend.producer,
    created: job.created,
    model_version: backend.modelVersion,
  };
  return runBatch(job, header, (image, id) => ({
    image_id: id,
    image_width: image.width,
    image_height: image.height,
    granularity: job.pointsPerSide,
    segments: backend.generateMasks(image, job.pointsPerSide),
    class_instances: [],
  }));
}

export function runPanoptic(job: InferenceJob, backend: PanopticBackend): BatchResult {
  const header: DatasetHeader = {
    format_version: FORMAT_VERSION,
    producer: backend.producer,
    created: job.created,
    model_version: backend.modelVersion,
  };
  return runBatch(job, header, (image, id) => ({
    image_id: id,
    image_width: image.width,
    image_height: image.height,
    granularity: job.pointsPerSide,
    segments: [],
    class_instances: backend.detectInstances(image, job.withMasks ?? false),
  }));
}
