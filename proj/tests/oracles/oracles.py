"""Independent reference values frozen into the C++ unit tests.

Run with `python3 tests/oracles/oracles.py`; needs mpmath. Every quantity is
computed by a route that shares no code with the library: arbitrary precision
series and quadrature, Talbot inversion of closed-form Laplace transforms, and
root finding on explicit characteristic functions.
"""

from mpmath import mp, mpf, pi, sin, cos, cosh, sinh, sqrt, exp, nsum, inf, quad, findroot
from mpmath import invertlaplace, log

mp.dps = 40


def heat_images(t, x, y, a=0, b=1):
    L = b - a
    g = lambda z: exp(-z * z / (2 * t)) / sqrt(2 * pi * t)
    return nsum(lambda n: g(y - x + 2 * n * L) - g(y + x - 2 * a + 2 * n * L), [-inf, inf])


def survival(x, t):
    return nsum(lambda j: 4 / ((2 * j + 1) * pi) * sin((2 * j + 1) * pi * x)
                * exp(-((2 * j + 1) * pi) ** 2 * t / 2), [0, inf])


def flux_right(x, t):
    return nsum(lambda k: -k * pi * (-1) ** k * sin(k * pi * x) * exp(-(k * pi) ** 2 * t / 2), [1, inf])


def resolvent(theta, x, y):
    k = sqrt(2 * theta)
    lo, hi = min(x, y), max(x, y)
    return 2 * sinh(k * lo) * sinh(k * (1 - hi)) / (k * sinh(k))


def exit_laplace(theta, x):
    k = sqrt(2 * theta)
    return cosh(k * (x - mpf(1) / 2)) / cosh(k / 2)


def law_point(x, c, t, y):
    """Density of X_t on (0,1) from x with Dirac(c) jumps, by Laplace inversion."""
    def F(theta):
        r = exit_laplace(theta, x) / (1 - exit_laplace(theta, c))
        return resolvent(theta, x, y) + r * resolvent(theta, c, y)
    return invertlaplace(F, t, method='talbot')


def renewal_point(x, c, t, lo, hi):
    def F(theta):
        r = exit_laplace(theta, x) / (1 - exit_laplace(theta, c))
        return (quad(lambda y: resolvent(theta, x, y), [lo, hi])
                + r * quad(lambda y: resolvent(theta, c, y), [lo, hi]))
    return invertlaplace(F, t, method='talbot')


def char_atoms(lam, left, right):
    """Characteristic determinant on (0,1) for atomic end laws [(p, w), ...]."""
    k = sqrt(2 * lam)
    s = lambda z: sin(k * z) / k
    c = lambda z: cos(k * z)
    Sa = sum(w * s(p) for p, w in left)
    Ca = sum(w * c(p) for p, w in left)
    Sb = sum(w * s(p) for p, w in right)
    Cb = sum(w * c(p) for p, w in right)
    # u = A s + B c;  u(0) = M_a(u), u(1) = M_b(u)
    return Sa * (c(1) - Cb) - (Ca - 1) * (s(1) - Sb)


def char_uniform_dirac(lam, lo, hi, q):
    k = sqrt(2 * lam)
    w = hi - lo
    Sa = (cos(k * lo) - cos(k * hi)) / (k * k * w)
    Ca = (sin(k * hi) - sin(k * lo)) / (k * w)
    Sb, Cb = sin(k * q) / k, cos(k * q)
    return Sa * (cos(k) - Cb) - (Ca - 1) * (sin(k) / k - Sb)


def real_roots(f, hi, step=mpf('0.01')):
    roots, lam, prev = [], step, f(step)
    while lam < hi:
        nxt = f(lam + step)
        if prev * nxt < 0:
            roots.append(findroot(f, (lam, lam + step), solver='anderson'))
        lam, prev = lam + step, nxt
    return roots


def chernoff_sum5(t):
    """min over s < 2 pi^2 of E[exp(s xi)]^5 exp(-s t), xi the centre exit time of (0, 1/2)."""
    quarter = mpf(1) / 4
    obj = lambda s: 5 * log(1 / cos(quarter * sqrt(2 * s))) - s * t
    slope = lambda s: 5 * mp.tan(quarter * sqrt(2 * s)) * quarter / sqrt(2 * s) - t
    lo, hi = mpf('1e-30'), 2 * pi ** 2 * (1 - mpf('1e-30'))
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if slope(mid) < 0 else (lo, mid)
    return exp(obj(lo))


def show(name, value):
    print(f"{name} = {mp.nstr(value, 17)}")


if __name__ == "__main__":
    for t, x, y in [(0.01, 0.3, 0.35), (0.1, 0.2, 0.7), (1.0, 0.5, 0.25)]:
        show(f"heat(0,1; t={t}, x={x}, y={y})", heat_images(mpf(t), mpf(x), mpf(y)))
    show("heat(-1,3; t=0.3, x=0, y=1.2)", heat_images(mpf('0.3'), mpf(0), mpf('1.2'), -1, 3))
    for x, t in [(0.5, 0.05), (0.1, 0.3), (0.5, 2.0)]:
        show(f"survival(x={x}, t={t})", survival(mpf(x), mpf(t)))
    show("survival(0.5,0.2) - survival(0.1,0.2)", survival(mpf('0.5'), mpf('0.2')) - survival(mpf('0.1'), mpf('0.2')))
    show("flux_right(x=0.3, t=0.1)", flux_right(mpf('0.3'), mpf('0.1')))
    k = sqrt(2 * 3)
    show("exit_mgf(x=0.3, s=3)", cos(k * (mpf('0.3') - mpf('0.5'))) / cos(k / 2))
    show("mgf_exit_center(s=pi^2, L=0.5)", 1 / cos(mpf('0.25') * sqrt(2 * pi ** 2)))

    for y in ['0.25', '0.5', '0.7']:
        show(f"law(x=0.3, Dirac 0.5, t=0.2, y={y})", law_point(mpf('0.3'), mpf('0.5'), mpf('0.2'), mpf(y)))
    show("law(x=0.5, Dirac 0.5, t=0.5, y=0.4)", law_point(mpf('0.5'), mpf('0.5'), mpf('0.5'), mpf('0.4')))
    show("law(x=0.5, Dirac 0.5, t=0.05, y=0.4)", law_point(mpf('0.5'), mpf('0.5'), mpf('0.05'), mpf('0.4')))
    show("renewal(x=0.3, Dirac 0.5, t=0.5, (0.4,0.6))",
         renewal_point(mpf('0.3'), mpf('0.5'), mpf('0.5'), mpf('0.4'), mpf('0.6')))

    d03 = lambda l: char_atoms(l, [(mpf('0.3'), 1)], [(mpf('0.3'), 1)]) / l
    print("Dirac(0.3) roots in (0,120]:", [mp.nstr(r, 17) for r in real_roots(d03, 120)])
    mix = [(mpf('0.3'), mpf('0.25')), (mpf('0.6'), mpf('0.75'))]
    dm = lambda l: char_atoms(l, mix, mix) / l
    print("mix 0.3:0.25,0.6:0.75 roots in (0,120]:", [mp.nstr(r, 17) for r in real_roots(dm, 120)])
    d4 = lambda l: char_atoms(l, [(mpf('0.25'), 1)], [(mpf('0.75'), 1)]) / l
    print("Dirac(1/4), Dirac(3/4) first root:", mp.nstr(real_roots(d4, 12)[0], 17))
    du = lambda l: char_uniform_dirac(l, mpf('0.2'), mpf('0.8'), mpf('0.5')) / l
    print("uniform(0.2,0.8), Dirac(0.5) real roots in (0,60]:", [mp.nstr(r, 17) for r in real_roots(du, 60)])

    for t in ['0.5', '1.0']:
        show(f"chernoff_sum5(t={t})", chernoff_sum5(mpf(t)))
