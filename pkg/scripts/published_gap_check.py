"""Recompute the gap-closed percentages from published mean-PAR10 aggregates.

Prints one row per scenario with the recomputed and printed values for the
RF column and the ZeroFolio column (the better of ZF and ZF-v2).

    python3 scripts/published_gap_check.py
"""

from zerofolio.evaluation import gap_closed, round_half_away

# scenario, SBS, RF, ZF, ZF-v2, VBS, printed gap RF, printed gap ZF
ROWS = [
    ("SAT12-ALL", 3066, 1010, 1156, 1002, 271, 74, 74),
    ("SAT03-16_INDU", 10097, 9483, 9218, 9187, 7152, 21, 31),
    ("MAXSAT12-PMS", 4899, 3748, 3658, 3587, 3131, 65, 74),
    ("MAXSAT-PMS-2016", 2965, 3186, 2254, 2240, 1833, -20, 64),
    ("MAXSAT-WPMS-2016", 3893, 3614, 3376, 3292, 2630, 22, 48),
    ("QBF-2016", 3667, 2387, 1979, 1958, 1209, 52, 70),
    ("ASP-POTASSCO", 1015, 775, 539, 526, 440, 42, 85),
    ("GRAPHS-2015", 8.8, 8.6, 8.3, 8.3, 8.0, 25, 63),
    ("MIP-2016", 3008, 3258, 1977, 1989, 282, -9, 38),
    ("CSP-MZN-2013", 9461, 5415, 4524, 4479, 3950, 73, 90),
    ("CSP-MZN-Time-2016", 3612, 2781, 2309, 2418, 2062, 54, 84),
]


def main() -> int:
    print(f"{'scenario':<20}{'RF':>8}{'printed':>9}{'ZF':>8}{'printed':>9}{'ZF only':>9}")
    bad = 0
    for name, sbs, rf, zf, zf2, vbs, p_rf, p_zf in ROWS:
        g_rf = gap_closed(sbs, rf, vbs)
        g_zf = gap_closed(sbs, min(zf, zf2), vbs)
        g_zf_only = gap_closed(sbs, zf, vbs)
        ok = round_half_away(g_rf) == p_rf and round_half_away(g_zf) == p_zf
        bad += not ok
        print(f"{name:<20}{g_rf:8.2f}{p_rf:9d}{g_zf:8.2f}{p_zf:9d}{g_zf_only:9.2f}{'' if ok else '  MISMATCH'}")
    print(f"{len(ROWS) - bad}/{len(ROWS)} rows reproduce both printed values")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
