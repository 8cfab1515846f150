/** Classify unified diff lines for display. */

export type DiffLineKind = "meta" | "hunk" | "add" | "del" | "context";

export interface DiffLine {
  kind: DiffLineKind;
  text: string;
}

const META_PREFIXES = [
  "diff --git",
  "index ",
  "--- ",
  "+++ ",
  "new file",
  "deleted file",
  "old mode",
  "new mode",
  "similarity index",
  "rename from",
  "rename to",
  "copy from",
  "copy to",
  "Binary files",
];

function classifyLine(line: string): DiffLineKind {
  for (const prefix of META_PREFIXES) {
    if (line.startsWith(prefix)) return "meta";
  }
  if (line.startsWith("@@")) return "hunk";
  if (line.startsWith("+")) return "add";
  if (line.startsWith("-")) return "del";
  return "context";
}

export function classifyDiff(diff: string): DiffLine[] {
  if (diff === "") return [];
  const lines = diff.split("\n");
  // a trailing newline produces an empty final element, not an empty line
  if (lines[lines.length - 1] === "") lines.pop();
  return lines.map((text) => ({ kind: classifyLine(text), text }));
}
