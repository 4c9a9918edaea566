#!/usr/bin/env python3
"""Rebuild IEEE Common Data Format case files from MATPOWER case data.

MATPOWER's case14.m / case_ieee30.m / case57.m were produced from the
University of Washington archive by cdf2matp; this script inverts that
conversion into the archive's fixed-column layout so the C++ parser can be
exercised against the original text format.

    python3 tools/mpc_to_cdf.py case14.m data/ieee14.cdf
"""
import re
import sys


def matrix(src, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, src, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(t) for t in line.split()])
    return rows


def names(src):
    m = re.search(r"mpc\.bus_name\s*=\s*\{(.*?)\};", src, re.S)
    if not m:
        return None
    return re.findall(r"'([^']*)'", m.group(1))


def place(card, col_lo, col_hi, text, left=False):
    width = col_hi - col_lo + 1
    text = text.ljust(width) if left else text.rjust(width)
    if len(text) > width:
        raise ValueError("field overflow: %r in cols %d-%d" % (text, col_lo, col_hi))
    card[col_lo - 1:col_hi] = list(text)


def num(v, decimals):
    s = ("%." + str(decimals) + "f") % v
    return s


def main(src_path, out_path):
    src = open(src_path).read()
    base_mva = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.]+)", src).group(1))
    title = re.search(r"^%\s+(\d\d/\d\d/\d\d .*)$", src, re.M).group(1)
    bus = matrix(src, "bus")
    gen = matrix(src, "gen")
    branch = matrix(src, "branch")
    bus_names = names(src) or ["Bus %d" % int(b[0]) for b in bus]

    pg, qg, vg, qmax, qmin = {}, {}, {}, {}, {}
    for g in gen:
        b = int(g[0])
        pg[b] = pg.get(b, 0.0) + g[1]
        qg[b] = qg.get(b, 0.0) + g[2]
        qmax[b] = qmax.get(b, 0.0) + g[3]
        qmin[b] = qmin.get(b, 0.0) + g[4]
        vg[b] = g[5]

    out = [" " + title]
    out.append("BUS DATA FOLLOWS                            %d ITEMS" % len(bus))
    type_map = {1: 0, 2: 2, 3: 3, 4: 0}
    for row, name in zip(bus, bus_names):
        b = int(row[0])
        card = [" "] * 127
        place(card, 1, 4, str(b))
        place(card, 6, 17, name[:12], left=True)
        place(card, 19, 20, str(int(row[6])))
        place(card, 21, 23, str(int(row[10])))
        place(card, 25, 26, str(type_map[int(row[1])]))
        place(card, 28, 33, num(row[7], 3))
        place(card, 34, 40, num(row[8], 2))
        place(card, 41, 49, num(row[2], 1))
        place(card, 50, 58, num(row[3], 1))
        place(card, 59, 67, num(pg.get(b, 0.0), 1))
        place(card, 68, 75, num(qg.get(b, 0.0), 1))
        place(card, 77, 83, num(row[9], 1))
        place(card, 85, 90, num(vg.get(b, 0.0), 3))
        place(card, 91, 98, num(qmax.get(b, 0.0), 1))
        place(card, 99, 106, num(qmin.get(b, 0.0), 1))
        place(card, 107, 114, num(row[4] / base_mva, 4))
        place(card, 115, 122, num(row[5] / base_mva, 4))
        place(card, 124, 127, "0")
        out.append("".join(card).rstrip())
    out.append("-999")
    out.append("BRANCH DATA FOLLOWS                         %d ITEMS" % len(branch))
    for row in branch:
        card = [" "] * 126
        ratio = row[8]
        place(card, 1, 4, str(int(row[0])))
        place(card, 6, 9, str(int(row[1])))
        place(card, 11, 12, "1")
        place(card, 13, 14, "1")
        place(card, 17, 17, "1")
        place(card, 19, 19, "1" if ratio != 0.0 else "0")
        place(card, 20, 29, num(row[2], 5))
        place(card, 30, 40, num(row[3], 5))
        place(card, 41, 50, num(row[4], 5))
        place(card, 51, 55, str(int(row[5])))
        place(card, 57, 61, str(int(row[6])))
        place(card, 63, 67, str(int(row[7])))
        place(card, 69, 72, "0")
        place(card, 74, 74, "0")
        place(card, 77, 82, num(ratio, 3))
        place(card, 84, 90, num(row[9], 2))
        out.append("".join(card).rstrip())
    out.append("-999")
    out.append("LOSS ZONES FOLLOWS                     1 ITEMS")
    out.append("  1 IEEE %d BUS" % len(bus))
    out.append("-99")
    out.append("INTERCHANGE DATA FOLLOWS                 1 ITEMS")
    out.append(" 1    1 Bus 1     HV    0.0  999.99  IEEE%d  IEEE %d Bus Test Case" % (len(bus), len(bus)))
    out.append("-9")
    out.append("TIE LINES FOLLOWS                     0 ITEMS")
    out.append("-999")
    out.append("END OF DATA")
    with open(out_path, "w") as f:
        f.write("\n".join(out) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
