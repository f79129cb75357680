/**
 * Merge record files by image_id, e.g. segmenter output with panoptic
 * output for the same image directory. Later inputs contribute whichever
 * of segments / class_instances they carry; dimension conflicts are
 * errors. The merged file is sorted by image_id, so sharded batch outputs
 * merge deterministically.
 */

import { DatasetHeader, FORMAT_VERSION, SegmentationRecord, readRecords, writeRecords } from "./records";

export function mergeRecordFiles(inputs: string[], outFile: string, created: string): number {
  if (inputs.length < 1) throw new Error("merge needs at least one input file");
  const merged = new Map<string, SegmentationRecord>();
  const producers: string[] = [];
  for (const input of inputs) {
    const { header, records } = readRecords(input);
    if (header.producer && !producers.includes(header.producer)) {
      producers.push(header.producer);
    }
    for (const record of records) {
      const existing = merged.get(record.image_id);
      if (!existing) {
        merged.set(record.image_id, { ...record });
        continue;
      }
      if (
        existing.image_width !== record.image_width ||
        existing.image_height !== record.image_height
      ) {
        throw new Error(
          `image_id ${record.image_id}: dimensions disagree between inputs ` +
            `(${existing.image_width}x${existing.image_height} vs ` +
            `${record.image_width}x${record.image_height})`,
        );
      }
      if (record.segments.length > 0) {
        if (existing.segments.length > 0) {
          throw new Error(`image_id ${record.image_id}: segments present in two inputs`);
        }
        existing.segments = record.segments;
        existing.granularity = record.granularity; // granularity belongs to the segmenter
      }
      if (record.class_instances.length > 0) {
        if (existing.class_instances.length > 0) {
          throw new Error(`image_id ${record.image_id}: class_instances present in two inputs`);
        }
        existing.class_instances = record.class_instances;
      }
    }
  }
  const header: DatasetHeader = {
    format_version: FORMAT_VERSION,
    producer: `adapter merge (${producers.join(" + ")})`,
    created,
  };
  const records = [...merged.values()];
  writeRecords(outFile, records, header);
  return records.length;
}
