#!/usr/bin/env python3
"""Regenerate the NVD test fixtures and their oracle counts.

Input is a directory of NVD 1.1 yearly feeds (nvdcve-1.1-YYYY.json.gz), e.g.
the data/ directory shipped inside the `cvedb` 0.0.5 wheel (feeds dated
2021-05-10). Output goes to tests/fixtures/nvd/.

The counting logic here is written independently of the C++ ingest code and
is the oracle the unit and acceptance tests compare against.
"""

import argparse
import glob
import gzip
import json
import os
import re

KERNEL_VERSIONS = ["2.4.20", "3.4.0", "4.4.60", "4.9.60", "4.9.72", "5.4.0"]

VERSION_RE = re.compile(r"^(\d+)\.(\d+)(?:\.(\d+))?(.*)$")
TOKEN_RE = re.compile(r"[A-Za-z0-9_./-]+")
REF_RE = re.compile(r"^[A-Za-z0-9_./-]*[A-Za-z0-9_]\.(c|h|S)$")


def parse_version(text):
    m = VERSION_RE.match(text)
    if not m:
        return None
    return (int(m.group(1)), int(m.group(2)), int(m.group(3) or 0))


def kernel_matches(item):
    """Yield vulnerable linux_kernel cpe_match entries of a 1.1 item."""
    def walk(nodes):
        for node in nodes:
            for m in node.get("cpe_match", []):
                parts = m["cpe23Uri"].split(":")
                if (len(parts) > 5 and parts[2] == "o" and parts[3] == "linux"
                        and parts[4] == "linux_kernel" and m.get("vulnerable")):
                    yield m
            yield from walk(node.get("children", []))
    yield from walk(item["configurations"]["nodes"])


def constraints_of(item):
    out = []
    for m in kernel_matches(item):
        version = m["cpe23Uri"].split(":")[5]
        bounds = {k: m[k] for k in m if k.startswith("version")}
        if bounds:
            c = {}
            bad = False
            for key, side, incl in (("versionStartIncluding", "start", True),
                                    ("versionStartExcluding", "start", False),
                                    ("versionEndIncluding", "end", True),
                                    ("versionEndExcluding", "end", False)):
                if key in bounds:
                    v = parse_version(bounds[key])
                    if v is None:
                        bad = True
                    else:
                        c[side] = (v, incl)
            if not bad and c:
                out.append(c)
        elif version == "*":
            out.append({"start": ((0, 0, 0), True)})
        elif version == "-":
            continue
        else:
            v = parse_version(version)
            if v is not None:
                out.append({"exact": v})
    return out


def admits(c, v):
    if "exact" in c:
        return c["exact"] == v
    if "start" in c:
        lo, incl = c["start"]
        if v < lo or (v == lo and not incl):
            return False
    if "end" in c:
        hi, incl = c["end"]
        if v > hi or (v == hi and not incl):
            return False
    return True


def description_of(item):
    for d in item["cve"]["description"]["description_data"]:
        if d["lang"] == "en":
            return d["value"]
    return ""


def ref_class(description):
    refs = []
    for tok in TOKEN_RE.findall(description):
        tok = tok.rstrip(".-")
        if REF_RE.match(tok):
            refs.append(tok)
    if any("/" in r for r in refs):
        return "full_path"
    if refs:
        return "file_only"
    return "no_reference"


def slim(item):
    item = json.loads(json.dumps(item))
    item.pop("impact", None)
    item["cve"].pop("references", None)
    return item


def to_v2(item):
    """Rewrite a 1.1 item in the NVD API 2.0 layout."""
    def nodes(ns):
        out = []
        for n in ns:
            out.append({
                "operator": n.get("operator", "OR"),
                "negate": False,
                "cpeMatch": [dict({"vulnerable": m["vulnerable"],
                                   "criteria": m["cpe23Uri"],
                                   "matchCriteriaId": "00000000-0000-0000-0000-000000000000"},
                                  **{k: m[k] for k in m if k.startswith("version")})
                             for m in n.get("cpe_match", [])],
            })
            out.extend(nodes(n.get("children", [])))
        return out
    return {"cve": {
        "id": item["cve"]["CVE_data_meta"]["ID"],
        "sourceIdentifier": item["cve"]["CVE_data_meta"]["ASSIGNER"],
        "published": item["publishedDate"],
        "lastModified": item["lastModifiedDate"],
        "vulnStatus": "Analyzed",
        "descriptions": [{"lang": d["lang"], "value": d["value"]}
                         for d in item["cve"]["description"]["description_data"]],
        "configurations": [{"nodes": nodes(item["configurations"]["nodes"])}],
    }}


def summarize(items):
    recs = [(i["cve"]["CVE_data_meta"]["ID"], constraints_of(i), description_of(i))
            for i in items]
    recs = [r for r in recs if r[1]]
    part = {"full_path": 0, "file_only": 0, "no_reference": 0}
    for _, _, desc in recs:
        part[ref_class(desc)] += 1
    matches = {}
    for text in KERNEL_VERSIONS:
        v = parse_version(text)
        matches[text] = sum(1 for _, cs, _ in recs if any(admits(c, v) for c in cs))
    return {"records": len(recs), "partition": part, "version_filter": matches}


def write_gz(path, doc):
    with gzip.GzipFile(path, "wb", mtime=0) as fh:
        fh.write(json.dumps(doc, sort_keys=True).encode())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("feeds")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "nvd"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    kernel = []
    timestamp = None
    slice_items = None
    for path in sorted(glob.glob(os.path.join(args.feeds, "nvdcve-1.1-*.json.gz"))):
        doc = json.load(gzip.open(path))
        timestamp = doc.get("CVE_data_timestamp", timestamp)
        if path.endswith("2017.json.gz"):
            items = doc["CVE_Items"]
            at = next(n for n, i in enumerate(items)
                      if i["cve"]["CVE_data_meta"]["ID"] == "CVE-2017-17863")
            slice_items = items[max(0, at - 500):max(0, at - 500) + 1000]
        kernel.extend(i for i in doc["CVE_Items"] if any(True for _ in kernel_matches(i)))

    header = {"CVE_data_type": "CVE", "CVE_data_format": "MITRE",
              "CVE_data_version": "4.0", "CVE_data_timestamp": timestamp}
    write_gz(os.path.join(args.out, "kernel_snapshot.json.gz"),
             dict(header, CVE_data_numberOfCVEs=str(len(kernel)),
                  CVE_Items=[slim(i) for i in kernel]))
    write_gz(os.path.join(args.out, "slice_2017_1000.json.gz"),
             dict(header, CVE_data_numberOfCVEs="1000",
                  CVE_Items=[slim(i) for i in slice_items]))

    v2_items = [i for i in slice_items if any(True for _ in kernel_matches(i))][:40]
    v2_items += [i for i in slice_items if not any(True for _ in kernel_matches(i))][:10]
    with open(os.path.join(args.out, "slice_2017_v2.json"), "w") as fh:
        json.dump({"resultsPerPage": len(v2_items), "startIndex": 0,
                   "totalResults": len(v2_items), "format": "NVD_CVE",
                   "version": "2.0", "timestamp": "2021-05-10T08:53:00.000",
                   "vulnerabilities": [to_v2(i) for i in v2_items]}, fh, indent=1)

    expected = {
        "snapshot_timestamp": timestamp,
        "kernel_snapshot": summarize(kernel),
        "slice_2017_1000": summarize(slice_items),
        "slice_2017_v2": summarize(v2_items),
    }
    with open(os.path.join(args.out, "expected.json"), "w") as fh:
        json.dump(expected, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(expected, indent=2))


if __name__ == "__main__":
    main()
