"""Run acceptance criteria 1-9 and print one PASS/FAIL line each.

    python3 scripts/run_acceptance.py [k ...]
"""
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "tests"))

from test_acceptance import CRITERIA, line  # noqa: E402


def main(argv):
    ks = [int(a) for a in argv] or sorted(CRITERIA)
    ok_all = True
    for k in ks:
        t0 = time.perf_counter()
        ok, detail = CRITERIA[k]()
        ok_all &= ok
        print(line(k, ok, detail) + f"  [{time.perf_counter() - t0:.1f} s]", flush=True)
    return 0 if ok_all else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
