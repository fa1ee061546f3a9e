// Presentation helpers. Nothing here computes a metric; numbers are printed
// as the API sent them.

/** Live word count for the edit box. The server's gate stays authoritative. */
export function wordCount(text: string): number {
  const trimmed = text.trim();
  if (!trimmed) return 0;
  return trimmed.split(/\s+/).length;
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function truncate(text: string, maxChars: number): string {
  if (text.length <= maxChars) return text;
  return text.slice(0, Math.max(0, maxChars - 1)) + "…";
}

// Metric values must appear exactly as the API sent them, so there is no
// rounding formatter on purpose. String() of a parsed JSON number gives the
// shortest round-trip form, which is what the server serialized.
export function exact(value: number | null): string {
  if (value === null) return "n/a";
  return String(value);
}

export function formatTimestamp(ts: number): string {
  return new Date(ts * 1000).toISOString().replace("T", " ").slice(0, 19);
}
