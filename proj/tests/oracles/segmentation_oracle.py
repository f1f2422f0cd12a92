#!/usr/bin/env python3
"""Run-length and interval-subtraction oracle for stop handling on 1 Hz
synthetic streams. A stop is a maximal run of still fixes whose first-to-last
span is >= t_park; stop instants (endpoints included) are removed from the
segment and each remaining piece must span >= t_min_segment.
"""

T_PARK, T_MIN_SEGMENT = 180, 120


def stops(moving):
    out, i = [], 0
    while i < len(moving):
        if moving[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(moving) and not moving[j + 1]:
            j += 1
        if j - i >= T_PARK:
            out.append((i, j))
        i = j + 1
    return out


def subtract(n, stop_list):
    pieces, cur = [], []
    for t in range(n):
        if any(a <= t <= b for a, b in stop_list):
            if cur:
                pieces.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        pieces.append(cur)
    return [(p[0], p[-1]) for p in pieces if p[-1] - p[0] >= T_MIN_SEGMENT]


def main():
    still300 = [False] * 301
    print("300 s still:", stops(still300))
    pause60 = [True] * 100 + [False] * 61 + [True] * 100
    print("60 s pause:", stops(pause60))
    alternating = [(t // 30) % 2 == 0 for t in range(600)]
    print("alternating 30/30 for 10 min:", stops(alternating))
    # 60 min segment, still between 1500 s and 2100 s
    moving = [not (1500 <= t <= 2100) for t in range(3601)]
    st = stops(moving)
    pieces = subtract(3601, st)
    active = sum(b - a for a, b in pieces)
    print("60 min with 10 min park: stops", st, "pieces", pieces, "active", active)


if __name__ == "__main__":
    main()
