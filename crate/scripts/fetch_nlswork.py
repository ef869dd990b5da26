#!/usr/bin/env python3
"""Download the NLS Young Women extract (nlswork) and write data/nlswork.csv.

The file is taken from the Stata Press dataset server when reachable and
otherwise from the copy bundled in the `econtools` wheel on PyPI.

Columns written: hours, vismin, south, age, birth_yr, year, ind_code.
`vismin` is 1 for race codes 2 and 3. Rows with any missing value in those
columns are dropped; no age restriction is applied.

Requires pandas. Usage: python scripts/fetch_nlswork.py [output.csv]
"""

import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

import pandas as pd

STATA_URL = "https://www.stata-press.com/data/r18/nlswork.dta"
WHEEL_MEMBER = "econtools/metrics/tests/data/nlswork.dta"
COLUMNS = ["hours", "vismin", "south", "age", "birth_yr", "year", "ind_code"]


def from_stata_press():
    with urllib.request.urlopen(STATA_URL, timeout=20) as resp:
        return resp.read()


def from_econtools_wheel():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "--dest", tmp, "econtools==0.3.2"],
            check=True,
            stdout=subprocess.DEVNULL,
        )
        wheel = next(Path(tmp).glob("econtools-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            return zf.read(WHEEL_MEMBER)


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "nlswork.csv"
    try:
        raw = from_stata_press()
    except Exception as err:  # noqa: BLE001
        print(f"stata-press unavailable ({err}); using the econtools wheel", file=sys.stderr)
        raw = from_econtools_wheel()
    df = pd.read_stata(io.BytesIO(raw), convert_categoricals=False)
    df["vismin"] = df["race"].isin([2, 3]).astype(int)
    df = df[COLUMNS].dropna()
    for col in ["vismin", "south", "age", "birth_yr", "year", "ind_code"]:
        df[col] = df[col].astype(int)
    out.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False)
    print(f"wrote {len(df)} rows to {out}", file=sys.stderr)


if __name__ == "__main__":
    main()
