"""Write the checked-in H2RF fixtures with nothing but the standard library."""

import pathlib
import struct

HERE = pathlib.Path(__file__).parent
TAG = "fixture:eighths"
F = 6


def encode(patient_id, tag, rows):
    out = bytearray(b"H2RF")
    out += struct.pack("<I", 1)
    for s in (patient_id, tag):
        b = s.encode("utf-8")
        out += struct.pack("<I", len(b)) + b
    out += struct.pack("<II", len(rows), len(rows[0]))
    for row in rows:
        out += struct.pack("<%df" % len(row), *row)
    return bytes(out)


def rows(seed, n):
    # Multiples of 1/8 in [-4, 4) survive f32 and sum exactly in f64.
    return [[((seed * 31 + i * 7 + j * 13) % 64 - 32) / 8 for j in range(F)] for i in range(n)]


def main():
    good = HERE / "h2rf"
    for pid, n in (("P001", 5), ("P002", 3), ("P003", 4)):
        (good / f"{pid}.h2rf").write_bytes(encode(pid, TAG, rows(int(pid[1:]), n)))

    broken = HERE / "broken"
    whole = encode("P009", TAG, rows(9, 2))
    (broken / "truncated.h2rf").write_bytes(whole[:-3])
    (broken / "bad_magic.h2rf").write_bytes(b"H2RX" + whole[4:])
    (broken / "version2.h2rf").write_bytes(whole[:4] + struct.pack("<I", 2) + whole[8:])
    nan = encode("P010", TAG, [[0.0, float("nan"), 0.0]])
    (broken / "nan.h2rf").write_bytes(nan)


if __name__ == "__main__":
    main()
