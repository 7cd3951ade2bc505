#!/usr/bin/env python3
"""Regenerate placement.csv and latency.csv.

Cities carry approximate coordinates. Round-trip times are modelled from the
great-circle distance with a fibre route-inflation factor chosen so that the
median one-way delay over all miner pairs is 69 ms. Output is deterministic.
"""
import csv
import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))

# (city, continent, lat, lon, miners)
CITIES = [
    # Europe: 94 miners
    ("Amsterdam", "EU", 52.37, 4.90, 6), ("Frankfurt", "EU", 50.11, 8.68, 6),
    ("London", "EU", 51.51, -0.13, 6), ("Paris", "EU", 48.86, 2.35, 5),
    ("Berlin", "EU", 52.52, 13.40, 4), ("Madrid", "EU", 40.42, -3.70, 3),
    ("Barcelona", "EU", 41.39, 2.17, 2), ("Milan", "EU", 45.46, 9.19, 3),
    ("Rome", "EU", 41.90, 12.50, 2), ("Vienna", "EU", 48.21, 16.37, 3),
    ("Zurich", "EU", 47.38, 8.54, 3), ("Brussels", "EU", 50.85, 4.35, 2),
    ("Dublin", "EU", 53.35, -6.26, 3), ("Stockholm", "EU", 59.33, 18.07, 4),
    ("Oslo", "EU", 59.91, 10.75, 2), ("Copenhagen", "EU", 55.68, 12.57, 2),
    ("Helsinki", "EU", 60.17, 24.94, 2), ("Warsaw", "EU", 52.23, 21.01, 3),
    ("Prague", "EU", 50.08, 14.44, 2), ("Budapest", "EU", 47.50, 19.04, 2),
    ("Bucharest", "EU", 44.43, 26.10, 2), ("Sofia", "EU", 42.70, 23.32, 2),
    ("Athens", "EU", 37.98, 23.73, 2), ("Lisbon", "EU", 38.72, -9.14, 2),
    ("Manchester", "EU", 53.48, -2.24, 2), ("Munich", "EU", 48.14, 11.58, 2),
    ("Hamburg", "EU", 53.55, 9.99, 2), ("Kyiv", "EU", 50.45, 30.52, 2),
    ("Riga", "EU", 56.95, 24.11, 1), ("Vilnius", "EU", 54.69, 25.28, 1),
    ("Tallinn", "EU", 59.44, 24.75, 1), ("Belgrade", "EU", 44.79, 20.45, 1),
    ("Zagreb", "EU", 45.81, 15.98, 1), ("Bratislava", "EU", 48.15, 17.11, 1),
    ("Luxembourg", "EU", 49.61, 6.13, 1), ("Marseille", "EU", 43.30, 5.37, 1),
    ("Edinburgh", "EU", 55.95, -3.19, 1), ("Lyon", "EU", 45.76, 4.84, 1),
    ("Moscow", "EU", 55.76, 37.62, 2), ("Saint Petersburg", "EU", 59.93, 30.34, 1),
    # North America: 83 miners
    ("New York", "NA", 40.71, -74.01, 7), ("Ashburn", "NA", 39.04, -77.49, 6),
    ("Chicago", "NA", 41.88, -87.63, 6), ("Dallas", "NA", 32.78, -96.80, 4),
    ("Los Angeles", "NA", 34.05, -118.24, 6), ("San Francisco", "NA", 37.77, -122.42, 5),
    ("San Jose", "NA", 37.34, -121.89, 3), ("Seattle", "NA", 47.61, -122.33, 3),
    ("Atlanta", "NA", 33.75, -84.39, 3), ("Miami", "NA", 25.76, -80.19, 3),
    ("Toronto", "NA", 43.65, -79.38, 4), ("Montreal", "NA", 45.50, -73.57, 3),
    ("Vancouver", "NA", 49.28, -123.12, 2), ("Denver", "NA", 39.74, -104.99, 2),
    ("Phoenix", "NA", 33.45, -112.07, 2), ("Houston", "NA", 29.76, -95.37, 2),
    ("Boston", "NA", 42.36, -71.06, 2), ("Philadelphia", "NA", 39.95, -75.17, 2),
    ("Minneapolis", "NA", 44.98, -93.27, 2), ("Salt Lake City", "NA", 40.76, -111.89, 2),
    ("Las Vegas", "NA", 36.17, -115.14, 1), ("Kansas City", "NA", 39.10, -94.58, 1),
    ("St. Louis", "NA", 38.63, -90.20, 1), ("Charlotte", "NA", 35.23, -80.84, 1),
    ("Portland", "NA", 45.52, -122.68, 1), ("Columbus", "NA", 39.96, -83.00, 1),
    ("Detroit", "NA", 42.33, -83.05, 1), ("Calgary", "NA", 51.05, -114.07, 1),
    ("Mexico City", "NA", 19.43, -99.13, 2), ("Monterrey", "NA", 25.69, -100.32, 1),
    ("Guadalajara", "NA", 20.66, -103.35, 1), ("Panama City", "NA", 8.98, -79.52, 1),
    ("San Juan", "NA", 18.47, -66.11, 1),
    # Asia: 37 miners
    ("Tokyo", "AS", 35.68, 139.69, 2), ("Osaka", "AS", 34.69, 135.50, 2),
    ("Seoul", "AS", 37.57, 126.98, 2), ("Singapore", "AS", 1.35, 103.82, 3),
    ("Hong Kong", "AS", 22.32, 114.17, 2), ("Shanghai", "AS", 31.23, 121.47, 2),
    ("Beijing", "AS", 39.90, 116.41, 2), ("Taipei", "AS", 25.03, 121.57, 1),
    ("Mumbai", "AS", 19.08, 72.88, 2), ("Bangalore", "AS", 12.97, 77.59, 2),
    ("New Delhi", "AS", 28.61, 77.21, 1), ("Chennai", "AS", 13.08, 80.27, 1),
    ("Bangkok", "AS", 13.76, 100.50, 1), ("Jakarta", "AS", -6.21, 106.85, 1),
    ("Kuala Lumpur", "AS", 3.14, 101.69, 1), ("Manila", "AS", 14.60, 120.98, 1),
    ("Ho Chi Minh City", "AS", 10.82, 106.63, 1), ("Hanoi", "AS", 21.03, 105.85, 1),
    ("Dubai", "AS", 25.20, 55.27, 2), ("Tel Aviv", "AS", 32.09, 34.78, 2),
    ("Istanbul", "AS", 41.01, 28.98, 1), ("Riyadh", "AS", 24.71, 46.68, 1),
    ("Karachi", "AS", 24.86, 67.01, 1), ("Almaty", "AS", 43.24, 76.89, 1),
    ("Novosibirsk", "AS", 55.01, 82.93, 1),
    # South America: 12 miners
    ("Sao Paulo", "SA", -23.55, -46.63, 3), ("Rio de Janeiro", "SA", -22.91, -43.17, 1),
    ("Buenos Aires", "SA", -34.60, -58.38, 2), ("Santiago", "SA", -33.45, -70.67, 2),
    ("Bogota", "SA", 4.71, -74.07, 1), ("Lima", "SA", -12.05, -77.04, 1),
    ("Caracas", "SA", 10.48, -66.90, 1), ("Medellin", "SA", 6.24, -75.58, 1),
    # Africa: 11 miners
    ("Johannesburg", "AF", -26.20, 28.05, 2), ("Cape Town", "AF", -33.92, 18.42, 2),
    ("Lagos", "AF", 6.52, 3.38, 2), ("Nairobi", "AF", -1.29, 36.82, 2),
    ("Cairo", "AF", 30.04, 31.24, 1), ("Casablanca", "AF", 33.57, -7.59, 1),
    ("Accra", "AF", 5.60, -0.19, 1),
    # Australia: 9 miners
    ("Sydney", "AU", -33.87, 151.21, 3), ("Melbourne", "AU", -37.81, 144.96, 2),
    ("Brisbane", "AU", -27.47, 153.03, 1), ("Perth", "AU", -31.95, 115.86, 1),
    ("Auckland", "AU", -36.85, 174.76, 1), ("Adelaide", "AU", -34.93, 138.60, 1),
]

EXPECTED = {"EU": 94, "NA": 83, "AS": 37, "SA": 12, "AF": 11, "AU": 9}
TARGET_MEDIAN_ONE_WAY_MS = 69.0
FIBRE_KM_PER_MS = 200.0
ACCESS_MS = 2.0


def gc_km(a, b):
    la1, lo1, la2, lo2 = map(math.radians, (a[2], a[3], b[2], b[3]))
    h = math.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(h))


def rtt(a, b, inflation):
    return 2.0 * (ACCESS_MS + gc_km(a, b) * inflation / FIBRE_KM_PER_MS)


def median(xs):
    xs = sorted(xs)
    m = len(xs) // 2
    return xs[m] if len(xs) % 2 else 0.5 * (xs[m - 1] + xs[m])


def main():
    counts = {}
    for c in CITIES:
        counts[c[1]] = counts.get(c[1], 0) + c[4]
    assert counts == EXPECTED, counts

    miners = [c for c in CITIES for _ in range(c[4])]
    pairs = [(miners[i], miners[j]) for i in range(len(miners)) for j in range(i + 1, len(miners))]

    lo, hi = 1.0, 5.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        med = median([0.0 if a[0] == b[0] else rtt(a, b, mid) / 2 for a, b in pairs])
        lo, hi = (mid, hi) if med < TARGET_MEDIAN_ONE_WAY_MS else (lo, mid)
    inflation = round(0.5 * (lo + hi), 4)

    with open(os.path.join(HERE, "placement.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["miner_id", "city", "continent"])
        for i, c in enumerate(miners):
            w.writerow([i, c[0], c[1]])

    with open(os.path.join(HERE, "latency.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["source", "destination", "avg_rtt_ms"])
        for i, a in enumerate(CITIES):
            for b in CITIES[i + 1:]:
                w.writerow([a[0], b[0], f"{rtt(a, b, inflation):.3f}"])

    print(f"{len(miners)} miners, {len(CITIES)} cities, route inflation {inflation}")


if __name__ == "__main__":
    main()
