#!/usr/bin/env python3
# Copyright 2026 The attwarp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Stand-in attention extractor: brightness of the image as an ATW1 map.

--fail-after N makes every call after the Nth exit with status 1; the call
count is kept in --state.
"""

import argparse
import struct
import sys
import zlib


def read_png_gray(path):
    data = open(path, "rb").read()
    if data[:8] != b"\x89PNG\r\n\x1a\n":
        raise SystemExit("not a PNG")
    pos = 8
    idat = b""
    width = height = 0
    while pos < len(data):
        length, kind = struct.unpack(">I4s", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + length]
        if kind == b"IHDR":
            width, height, depth, color = struct.unpack(">IIBB", body[:10])
            if depth != 8 or color != 2:
                raise SystemExit("expected 8-bit RGB")
        elif kind == b"IDAT":
            idat += body
        pos += 12 + length
    raw = zlib.decompress(idat)
    stride = width * 3
    rows = []
    prev = bytearray(stride)
    offset = 0
    for _ in range(height):
        kind = raw[offset]
        line = bytearray(raw[offset + 1:offset + 1 + stride])
        offset += 1 + stride
        for i in range(stride):
            a = line[i - 3] if i >= 3 else 0
            b = prev[i]
            c = prev[i - 3] if i >= 3 else 0
            if kind == 1:
                line[i] = (line[i] + a) & 0xFF
            elif kind == 2:
                line[i] = (line[i] + b) & 0xFF
            elif kind == 3:
                line[i] = (line[i] + (a + b) // 2) & 0xFF
            elif kind == 4:
                p = a + b - c
                pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                pred = a if pa <= pb and pa <= pc else (b if pb <= pc else c)
                line[i] = (line[i] + pred) & 0xFF
        rows.append([sum(line[3 * x:3 * x + 3]) / (3 * 255.0) for x in range(width)])
        prev = line
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--image", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--fail-after", type=int, default=-1)
    parser.add_argument("--state")
    args = parser.parse_args()

    if args.fail_after >= 0:
        calls = 0
        try:
            calls = int(open(args.state).read())
        except (OSError, ValueError):
            pass
        open(args.state, "w").write(str(calls + 1))
        if calls >= args.fail_after:
            sys.exit(1)

    rows = read_png_gray(args.image)
    height, width = len(rows), len(rows[0])
    with open(args.out, "wb") as f:
        f.write(b"ATW1" + struct.pack("<III", height, width, 0))
        for row in rows:
            f.write(struct.pack("<%df" % width, *[v * v + 0.05 for v in row]))


if __name__ == "__main__":
    main()
