#!/usr/bin/env python3
"""Download the two public daily factor files into ./data.

Convenience plumbing only: network fetching is not a tested feature of
the package, and this script is deliberately dumb. If the library's
hosting or file naming changes, download the daily five-factor and
momentum CSVs by hand and drop them in ./data (or point FACTOR_DATA_DIR
at them); the test suite discovers them by name pattern.
"""

import io
import pathlib
import sys
import urllib.request
import zipfile

BASE = "https://mba.tuck.dartmouth.edu/pages/faculty/ken.french/ftp/"
ARCHIVES = (
    "F-F_Research_Data_5_Factors_2x3_daily_CSV.zip",
    "F-F_Momentum_Factor_daily_CSV.zip",
)


def main() -> int:
    dest = pathlib.Path(__file__).resolve().parent.parent / "data"
    dest.mkdir(exist_ok=True)
    for name in ARCHIVES:
        url = BASE + name
        print(f"fetching {url}")
        try:
            with urllib.request.urlopen(url, timeout=60) as resp:
                blob = resp.read()
        except OSError as exc:
            print(f"  failed: {exc}", file=sys.stderr)
            print("  download manually and unzip into ./data",
                  file=sys.stderr)
            return 1
        with zipfile.ZipFile(io.BytesIO(blob)) as zf:
            for member in zf.namelist():
                out = dest / pathlib.Path(member).name
                out.write_bytes(zf.read(member))
                print(f"  -> {out}")
    print("done; run the data-dependent tests with: python3 -m pytest "
          "tests/test_acceptance.py")
    return 0


if __name__ == "__main__":
    sys.exit(main())
