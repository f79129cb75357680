/**
 * Interchange records (format_version "1"), one JSON document per line with
 * a header line first. Field names are exact and case-sensitive; the
 * analysis side validates these files bit-exactly, so writers always emit
 * records sorted by image_id.
 */

import * as fs from "fs";

import { RunLengthMask } from "./rle";

export { RunLengthMask };

export const FORMAT_VERSION = "1";

export interface ClassInstance {
  label: string;
  score?: number;
  mask?: RunLengthMask;
}

export interface SegmentationRecord {
  image_id: string;
  image_width: number;
  image_height: number;
  granularity: number;
  segments: RunLengthMask[];
  class_instances: ClassInstance[];
}

export interface DatasetHeader {
  format_version: string;
  producer: string;
  created: string;
  model_version?: string;
}

export function writeRecords(
  path: string,
  records: SegmentationRecord[],
  header: DatasetHeader,
): void {
  const sorted = [...records].sort((a, b) =>
    a.image_id < b.image_id ? -1 : a.image_id > b.image_id ? 1 : 0,
  );
  const lines = [JSON.stringify(header)];
  for (const record of sorted) {
    lines.push(JSON.stringify(record));
  }
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

export function readRecords(path: string): {
  header: DatasetHeader;
  records: SegmentationRecord[];
} {
  const text = fs.readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new Error(`${path}: empty dataset file (missing header line)`);
  }
  const header = JSON.parse(lines[0]) as DatasetHeader;
  if (header.format_version !== FORMAT_VERSION) {
    throw new Error(
      `${path}: unsupported format_version ${JSON.stringify(header.format_version)}, ` +
        `expected "${FORMAT_VERSION}"`,
    );
  }
  const records: SegmentationRecord[] = [];
  const seen = new Set<string>();
  for (let i = 1; i < lines.length; i++) {
    const obj = JSON.parse(lines[i]) as Record<string, unknown>;
    if (typeof obj.image_id !== "string" || obj.image_id.length === 0) {
      throw new Error(`${path}:${i + 1}: record without image_id`);
    }
    if (seen.has(obj.image_id)) {
      throw new Error(`${path}:${i + 1}: duplicate image_id ${obj.image_id}`);
    }
    seen.add(obj.image_id);
    records.push({
      image_id: obj.image_id,
      image_width: obj.image_width as number,
      image_height: obj.image_height as number,
      granularity: (obj.granularity as number) ?? 64,
      segments: (obj.segments as RunLengthMask[]) ?? [],
      class_instances: (obj.class_instances as ClassInstance[]) ?? [],
    });
  }
  return { header, records };
}
