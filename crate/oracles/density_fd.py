# Mixed central finite differences of the SJC CDF in 60-digit arithmetic,
# Richardson-extrapolated, on the 20x20 grid (i + 0.5) / 20 for the
# parameter grid {0.1, 0.5, 0.9}^2. Output: tests/data/density_fd_oracle.csv
import sys
from mpmath import mp, mpf, log

mp.dps = 60


def jc(u, v, lu, ll):
    k = 1 / log(2 - lu, 2)
    r = -1 / log(ll, 2)
    x = (1 - (1 - u) ** k) ** (-r) + (1 - (1 - v) ** k) ** (-r) - 1
    return 1 - (1 - x ** (-1 / r)) ** (1 / k)


def sjc(u, v, lu, ll):
    return (jc(u, v, lu, ll) + jc(1 - u, 1 - v, ll, lu) + u + v - 1) / 2


def mixed(u, v, lu, ll, h):
    c = lambda a, b: sjc(a, b, lu, ll)
    return (c(u + h, v + h) - c(u + h, v - h) - c(u - h, v + h) + c(u - h, v - h)) / (4 * h * h)


out = open(sys.argv[1], "w")
out.write("lambda_u,lambda_l,u,v,density\n")
grid = [mpf(1) / 10, mpf(1) / 2, mpf(9) / 10]
pts = [(mpf(i) + mpf(1) / 2) / 20 for i in range(20)]
h = mpf(10) ** -12
for lu in grid:
    for ll in grid:
        for u in pts:
            for v in pts:
                d1 = mixed(u, v, lu, ll, h)
                d2 = mixed(u, v, lu, ll, h / 2)
                d = (4 * d2 - d1) / 3
                out.write(f"{float(lu)},{float(ll)},{float(u)},{float(v)},{mp.nstr(d, 20)}\n")
