/** Minimal PFM (portable float map) decoder.
 *
 * Layout: magic token ("PF" color, "Pf" grayscale), width, height, then a
 * scale whose sign carries the byte order (negative = little-endian), each
 * token terminated by one whitespace byte, followed by raw float32 rows
 * stored bottom-up. The decoder returns top-down interleaved data.
 */

export interface PfmImage {
  width: number;
  height: number;
  channels: 1 | 3;
  /** Row-major top-down, channels interleaved; length = w*h*channels. */
  data: Float32Array;
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

function readTokens(bytes: Uint8Array, count: number): { tokens: string[]; offset: number } {
  const tokens: string[] = [];
  let i = 0;
  while (tokens.length < count) {
    while (i < bytes.length && WHITESPACE.has(bytes[i]!)) i += 1;
    const start = i;
    while (i < bytes.length && !WHITESPACE.has(bytes[i]!)) i += 1;
    if (start === i) throw new Error("truncated header");
    tokens.push(String.fromCharCode(...bytes.subarray(start, i)));
    // Exactly one whitespace byte terminates a token; the one after the
    // last token is where the binary payload begins.
    i += 1;
  }
  return { tokens, offset: i };
}

export function decodePfm(buffer: ArrayBuffer): PfmImage {
  const bytes = new Uint8Array(buffer);
  const { tokens, offset } = readTokens(bytes, 4);
  const [magic, widthTok, heightTok, scaleTok] = tokens as [string, string, string, string];
  if (magic !== "PF" && magic !== "Pf") {
    throw new Error(`not a PFM stream: magic ${JSON.stringify(magic)}`);
  }
  const channels: 1 | 3 = magic === "PF" ? 3 : 1;
  const width = Number(widthTok);
  const height = Number(heightTok);
  const scale = Number(scaleTok);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new Error(`bad dimensions ${widthTok} x ${heightTok}`);
  }
  if (!Number.isFinite(scale) || scale === 0) {
    throw new Error(`bad scale ${scaleTok}`);
  }
  const littleEndian = scale < 0;
  const count = width * height * channels;
  if (buffer.byteLength - offset < count * 4) {
    throw new Error("truncated pixel data");
  }
  const view = new DataView(buffer, offset);
  const data = new Float32Array(count);
  const rowFloats = width * channels;
  for (let y = 0; y < height; y += 1) {
    const srcRow = height - 1 - y;
    for (let k = 0; k < rowFloats; k += 1) {
      data[y * rowFloats + k] = view.getFloat32((srcRow * rowFloats + k) * 4, littleEndian);
    }
  }
  return { width, height, channels, data };
}
