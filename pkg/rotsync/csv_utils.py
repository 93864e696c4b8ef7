#!/usr/bin/env python3

"""
Comma-Separated Values (CSV) utilities for the rotsync result files.
"""

import argparse
import csv
import sys

from .analysis import median_over_seeds


def optional_to_float(value):
    """
    Converts value to float if possible and returns None otherwise.
    """
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def uncommented(infile):
    """
    The lines of `infile` except the ones starting with "#".
    """
    for line in infile:
        if not line.startswith("#"):
            yield line


def aggregate(args):
    """
    aggregate sub-command
    """
    keys = [key for key in args.keys.split(",") if key]
    header = None
    groups = {}
    errors = total_input_rows = 0

    for infile in args.infiles:
        reader = csv.reader(uncommented(infile), dialect=args.dialect)
        file_header = next(reader, None)
        if file_header is None:
            continue

        if header is None:
            header = file_header
            missing = [key for key in keys if key not in header]
            if missing:
                print(f"{', '.join(missing)} not present in the header of "
                      f"{infile.name}.", file=sys.stderr)
                return 1
        elif file_header != header:
            print(f"The header of {infile.name} differs from the first "
                  f"file.", file=sys.stderr)
            return 1

        key_columns = [header.index(key) for key in keys]
        for row in reader:
            total_input_rows += 1
            if len(row) != len(header):
                errors += 1
                continue
            key = tuple(row[i] for i in key_columns)
            groups.setdefault(key, []).append(row)

    if header is None:
        print("No input rows.", file=sys.stderr)
        return 1

    value_columns = [i for i, name in enumerate(header)
                     if name not in keys and name != args.seed_column]

    writer = csv.writer(args.output, dialect=args.dialect,
                        quoting=csv.QUOTE_MINIMAL)
    writer.writerow(keys + ["seeds"] + [header[i] for i in value_columns])

    for key, rows in groups.items():
        values = []
        for i in value_columns:
            numbers = [optional_to_float(row[i]) for row in rows]
            if all(n is None for n in numbers):
                texts = {row[i] for row in rows}
                values.append(texts.pop() if len(texts) == 1 else "")
            else:
                values.append(repr(median_over_seeds(numbers)))
        writer.writerow(list(key) + [len(rows)] + values)
    args.output.flush()

    if errors > 0:
        print(f"{errors} rows discarded due to errors.", file=sys.stderr)

    print(f"{len(groups)} rows has written for {total_input_rows} input "
          f"rows.", file=sys.stderr)
    return 0


def main(argv=None):
    """
    The main entrypoint for the application
    """
    parser = argparse.ArgumentParser(
        description="Comma-Separated Values (CSV) utilities for rotsync")
    parser.set_defaults(func=lambda args: parser.print_help())

    sub_parsers = parser.add_subparsers(
        help="csv utility supports the following sub-commands")

    parser_aggr = sub_parsers.add_parser(
        "aggregate", aliases=["aggr"],
        help="the median over the seeds of the rows with the same keys")
    parser_aggr.set_defaults(func=aggregate)

    parser_aggr.add_argument("infiles", metavar="<file>", nargs="+",
                             type=argparse.FileType("r"),
                             help="input CSV file")
    parser_aggr.add_argument("-k", "--keys", metavar="<col>[,<col>...]",
                             required=True,
                             help="the columns identifying a group, e.g. "
                             "\"N,delta\" for twopoint results")
    parser_aggr.add_argument("-S", "--seed-column", metavar="<col>",
                             default="seed",
                             help="the seed column, left out of the "
                             "output (default: seed)")
    parser_aggr.add_argument("-o", "--output", metavar="<file>", default="-",
                             type=argparse.FileType("w"),
                             help="write output to <file> instead of stdout")
    parser_aggr.add_argument("-d", "--dialect", default="unix",
                             choices=["excel", "excel-tab", "unix"],
                             help="csv dialect")

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
