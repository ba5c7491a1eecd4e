"""
Reads csv benchmarks written by `fovmatch bench`. Creates a DataFrame for each benchmark, and prints the table and its
per-value summary for easy reading. The benchmarks are stored in the object benches

Depends:           pandas module (pip install pandas)

How to Run:        python -i read_csv.py /tmp/bench1.csv /tmp/bench2.csv ...
                   e.g.: ipython -i read_csv.py /tmp/downsample.csv /tmp/patch.csv
                   e.g.: ipython -i read_csv.py /tmp/*.csv


Output:            benches, summaries
                   benches.bench1 (DataFrame), benches.bench2 (DataFrame)...
                   summaries.bench1 (DataFrame of means per sweep value)...

DataFrame API:     value = benches.bench1.loc[sweep, value, case][column]
                   example:
                   dsc_after_ds8_case0 = benches.bench1.loc["downsample", "8", 0]["dsc_after"]
                   mean_runtime_ds2 = summaries.bench1.loc["2"]["runtime_seconds"]

"""

import sys
from os.path import basename, exists, splitext

import pandas as pd

pd.options.display.width = 0

SUMMARY_COLUMNS = [
    "shift_error_x_mm", "shift_error_y_mm", "shift_error_z_mm", "dsc_before", "dsc_after", "runtime_seconds"
]


class Benchmarks():
    pass


def parseCsvFile(filename, sep=','):
    """Inputs a bench file and outputs a DataFrame indexed by (sweep, value, case).
    input: (string) filename
    output: (DataFrame) seq
    """
    col_types = dict(sweep=str, value=str, case=int)
    seq = pd.read_csv(filename, header=0, sep=sep, dtype=col_types)
    return seq.set_index(["sweep", "value", "case"])


def summarize(seq):
    """Mean of the error, DSC and runtime columns per sweep value, in the order of the file"""
    columns = [c for c in SUMMARY_COLUMNS if c in seq.columns]
    return seq.groupby(level="value", sort=False)[columns].mean()


benches = Benchmarks()
summaries = Benchmarks()

filenames = sys.argv[1:]
for filename in filenames:
    if not exists(filename):
        continue
    benchname = splitext(basename(filename))[0]
    seq = parseCsvFile(filename)
    setattr(benches, benchname, seq)
    setattr(summaries, benchname, summarize(seq))
    print(benchname)
    print(seq)
    print(getattr(summaries, benchname))
    print("********************")
