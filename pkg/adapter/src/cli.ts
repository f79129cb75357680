#!/usr/bin/env node
/**
 * adapter segment  --images DIR --out FILE [--points-per-side 64]
 *                  [--backend grid|sam] [--weights PATH] [--created ISO]
 * adapter panoptic --images DIR --out FILE [--backend grid|fcclip]
 *                  [--weights PATH] [--with-masks] [--created ISO]
 * adapter merge    --inputs A B [...] --out FILE [--created ISO]
 *
 * Output is the analysis side's interchange format, version "1".
 * Exit codes: 0 success, 1 runtime failure, 2 bad invocation/config.
 */

import { MissingWeightsError, createPanopticBackend, createSegmenterBackend } from "./backends";
import { BatchResult, runPanoptic, runSegmenter } from "./batch";
import { mergeRecordFiles } from "./merge";

interface ParsedArgs {
  flags: Map<string, string | string[] | true>;
}

const LIST_FLAGS = new Set(["inputs"]);
const BOOL_FLAGS = new Set(["with-masks"]);

function parseArgs(argv: string[]): ParsedArgs {
  const flags = new Map<string, string | string[] | true>();
  let i = 0;
  while (i < argv.length) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new UsageError(`unexpected argument ${JSON.stringify(arg)}`);
    }
    const name = arg.slice(2);
    if (BOOL_FLAGS.has(name)) {
      flags.set(name, true);
      i++;
      continue;
    }
    if (LIST_FLAGS.has(name)) {
      const values: string[] = [];
      i++;
      while (i < argv.length && !argv[i].startsWith("--")) {
        values.push(argv[i]);
        i++;
      }
      if (values.length === 0) throw new UsageError(`--${name} needs at least one value`);
      flags.set(name, values);
      continue;
    }
    if (i + 1 >= argv.length || argv[i + 1].startsWith("--")) {
      throw new UsageError(`--${name} needs a value`);
    }
    flags.set(name, argv[i + 1]);
    i += 2;
  }
  return { flags };
}

class UsageError extends Error {}

function requireString(args: ParsedArgs, name: string): string {
  const value = args.flags.get(name);
  if (typeof value !== "string") throw new UsageError(`--${name} is required`);
  return value;
}

function optionalString(args: ParsedArgs, name: string, fallback: string): string {
  const value = args.flags.get(name);
  return typeof value === "string" ? value : fallback;
}

function reportBatch(kind: string, out: string, result: BatchResult): void {
  console.log(`${kind}: wrote ${result.records} records to ${out}`);
  if (result.failuresFile) {
    console.error(
      `${kind}: ${result.failures} image(s) failed; see ${result.failuresFile}`,
    );
  }
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    const args = parseArgs(rest);
    const created = optionalString(args, "created", new Date().toISOString());
    if (command === "segment") {
      const pointsPerSide = Number(optionalString(args, "points-per-side", "64"));
      if (!Number.isInteger(pointsPerSide) || pointsPerSide < 1) {
        throw new UsageError("--points-per-side must be a positive integer");
      }
      const backend = createSegmenterBackend(
        optionalString(args, "backend", "grid"),
        args.flags.get("weights") as string | undefined,
      );
      const out = requireString(args, "out");
      const result = runSegmenter(
        {
          imagesDir: requireString(args, "images"),
          outFile: out,
          pointsPerSide,
          created,
        },
        backend,
      );
      reportBatch("segment", out, result);
      return 0;
    }
    if (command === "panoptic") {
      const backend = createPanopticBackend(
        optionalString(args, "backend", "grid"),
        args.flags.get("weights") as string | undefined,
      );
      const out = requireString(args, "out");
      const result = runPanoptic(
        {
          imagesDir: requireString(args, "images"),
          outFile: out,
          pointsPerSide: 64,
          created,
          withMasks: args.flags.get("with-masks") === true,
        },
        backend,
      );
      reportBatch("panoptic", out, result);
      return 0;
    }
    if (command === "merge") {
      const inputs = args.flags.get("inputs");
      if (!Array.isArray(inputs)) throw new UsageError("--inputs is required");
      const out = requireString(args, "out");
      const count = mergeRecordFiles(inputs, out, created);
      console.log(`merge: wrote ${count} records to ${out}`);
      return 0;
    }
    throw new UsageError(
      `unknown command ${JSON.stringify(command ?? "")}; expected segment, panoptic, or merge`,
    );
  } catch (err) {
    if (err instanceof UsageError || err instanceof MissingWeightsError) {
      console.error(`error: ${(err as Error).message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
