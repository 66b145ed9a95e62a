import { inflateSync } from 'zlib';
import { readFileSync } from 'fs';

/** 8-bit RGB pixels, row-major. */
export interface Image {
  width: number;
  height: number;
  data: Uint8Array; // length = width * height * 3
}

/** Half-open pixel box [x0, y0, x1, y1). */
export type Box = [number, number, number, number];

const PNG_SIGNATURE = Buffer.from([137, 80, 78, 71, 13, 10, 26, 10]);

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

export function decodePng(buf: Buffer): Image {
  if (!buf.subarray(0, 8).equals(PNG_SIGNATURE)) {
    throw new Error('not a PNG file');
  }
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  let palette: Buffer | null = null;
  const idat: Buffer[] = [];
  let offset = 8;
  while (offset < buf.length) {
    const length = buf.readUInt32BE(offset);
    const type = buf.toString('ascii', offset + 4, offset + 8);
    const body = buf.subarray(offset + 8, offset + 8 + length);
    if (type === 'IHDR') {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      bitDepth = body[8];
      colorType = body[9];
      if (body[12] !== 0) throw new Error('interlaced PNG not supported');
      if (bitDepth !== 8) throw new Error(`unsupported PNG bit depth ${bitDepth}`);
    } else if (type === 'PLTE') {
      palette = Buffer.from(body);
    } else if (type === 'IDAT') {
      idat.push(body);
    } else if (type === 'IEND') {
      break;
    }
    offset += 12 + length; // length + type + body + crc
  }
  const channels = { 0: 1, 2: 3, 3: 1, 4: 2, 6: 4 }[colorType];
  if (channels === undefined) throw new Error(`unsupported PNG color type ${colorType}`);
  if (colorType === 3 && palette === null) throw new Error('palette PNG without PLTE');

  const raw = inflateSync(Buffer.concat(idat));
  const stride = width * channels;
  if (raw.length !== (stride + 1) * height) throw new Error('corrupt PNG pixel data');

  // undo per-scanline filtering
  const lines = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const src = y * (stride + 1) + 1;
    const dst = y * stride;
    for (let x = 0; x < stride; x++) {
      const value = raw[src + x];
      const left = x >= channels ? lines[dst + x - channels] : 0;
      const up = y > 0 ? lines[dst + x - stride] : 0;
      const upLeft = y > 0 && x >= channels ? lines[dst + x - stride - channels] : 0;
      let out: number;
      switch (filter) {
        case 0: out = value; break;
        case 1: out = value + left; break;
        case 2: out = value + up; break;
        case 3: out = value + ((left + up) >> 1); break;
        case 4: out = value + paeth(left, up, upLeft); break;
        default: throw new Error(`unknown PNG filter ${filter}`);
      }
      lines[dst + x] = out & 0xff;
    }
  }

  // expand to RGB
  const data = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    const s = i * channels;
    let r: number, g: number, b: number;
    if (colorType === 2 || colorType === 6) {
      r = lines[s]; g = lines[s + 1]; b = lines[s + 2];
    } else if (colorType === 0 || colorType === 4) {
      r = g = b = lines[s];
    } else {
      const p = lines[s] * 3;
      r = palette![p]; g = palette![p + 1]; b = palette![p + 2];
    }
    data[i * 3] = r;
    data[i * 3 + 1] = g;
    data[i * 3 + 2] = b;
  }
  return { width, height, data };
}

export function decodePpm(buf: Buffer): Image {
  // header: "P6" <width> <height> <maxval> with #-comments allowed
  let pos = 0;
  const token = (): string => {
    while (pos < buf.length) {
      const c = buf[pos];
      if (c === 35 /* # */) {
        while (pos < buf.length && buf[pos] !== 10) pos++;
      } else if (c === 32 || c === 9 || c === 10 || c === 13) {
        pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < buf.length && ![32, 9, 10, 13].includes(buf[pos])) pos++;
    return buf.toString('ascii', start, pos);
  };
  if (token() !== 'P6') throw new Error('not a binary PPM file');
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0)) throw new Error('bad PPM dimensions');
  if (maxval !== 255) throw new Error(`unsupported PPM maxval ${maxval}`);
  pos++; // single whitespace after maxval
  const need = width * height * 3;
  if (buf.length - pos < need) throw new Error('truncated PPM pixel data');
  return { width, height, data: new Uint8Array(buf.subarray(pos, pos + need)) };
}

export function readImage(path: string): Image {
  const buf = readFileSync(path);
  if (buf.subarray(0, 8).equals(PNG_SIGNATURE)) return decodePng(buf);
  if (buf[0] === 80 && buf[1] === 54) return decodePpm(buf); // "P6"
  throw new Error(`unsupported image format: ${path}`);
}

export function crop(img: Image, box: Box): Image {
  const x0 = Math.max(0, box[0]);
  const y0 = Math.max(0, box[1]);
  const x1 = Math.min(img.width, box[2]);
  const y1 = Math.min(img.height, box[3]);
  if (x1 <= x0 || y1 <= y0) throw new Error(`empty crop box [${box}]`);
  const w = x1 - x0;
  const h = y1 - y0;
  const data = new Uint8Array(w * h * 3);
  for (let y = 0; y < h; y++) {
    const src = ((y0 + y) * img.width + x0) * 3;
    data.set(img.data.subarray(src, src + w * 3), y * w * 3);
  }
  return { width: w, height: h, data };
}

export function resizeNearest(img: Image, width: number, height: number): Image {
  const data = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const sy = Math.min(img.height - 1, Math.floor(((y + 0.5) * img.height) / height));
    for (let x = 0; x < width; x++) {
      const sx = Math.min(img.width - 1, Math.floor(((x + 0.5) * img.width) / width));
      const s = (sy * img.width + sx) * 3;
      const d = (y * width + x) * 3;
      data[d] = img.data[s];
      data[d + 1] = img.data[s + 1];
      data[d + 2] = img.data[s + 2];
    }
  }
  return { width, height, data };
}
