"""Independent high-precision reference values for the C++ tests.

Everything here uses mpmath only (parabolic cylinder functions, quadrature,
root finding) and none of the library code. Run it to regenerate the numbers
frozen in tests/oracle_values.hpp.
"""
import mpmath as mp

mp.mp.dps = 40


def header(name):
    print(f"// {name}")


# Parabolic cylinder functions D_nu(x).
header("cylinder D_nu(x)")
for nu in (mp.mpf("-1.05"), mp.mpf("-0.5"), mp.mpf("-2.3"), mp.mpf("-1")):
    for x in (-6, -3, -1, 0, 1.5, 4, 10):
        print(f"{{{mp.nstr(nu, 6)}, {x}, {mp.nstr(mp.pcfd(nu, x), 20)}}},")

# OU reference problem: smooth fit with psi' = e^{z^2/4} D_nu(-z), -phi' = e^{z^2/4} D_nu(z).
mu, theta, sigma, r, kappa, eta0 = mp.mpf("0.1"), mp.mpf(1), mp.sqrt(mp.mpf("0.8")), mp.mpf("0.05"), mp.mpf(1), mp.mpf("0.5")


def ou_case(mu, theta, sigma, r, kappa, eta0):
    nu = -(r + theta) / theta
    k = mp.sqrt(2 * theta) / sigma

    def z(x):
        return (x - mu / theta) * k

    def hp(x):  # psi^ = psi'
        return mp.exp(z(x) ** 2 / 4) * mp.pcfd(nu, -z(x))

    def hf(x):  # phi^ = -phi'
        return mp.exp(z(x) ** 2 / 4) * mp.pcfd(nu, z(x))

    dhp = lambda x: mp.diff(hp, x)
    dhf = lambda x: mp.diff(hf, x)

    # v' = a psi^ + c phi^ with v'(0) = kappa, v'(b) = eta0, v''(b) = 0.
    def coeffs(b):
        M = mp.matrix([[hp(0), hf(0)], [hp(b), hf(b)]])
        return mp.lu_solve(M, mp.matrix([kappa, eta0]))

    def second(b):
        a, c = coeffs(b)
        return a * dhp(b) + c * dhf(b)

    b = mp.findroot(second, mp.mpf("0.9"))
    a, c = coeffs(b)
    vb = eta0 / r * (mu - theta * b)
    vprime = lambda x: a * hp(x) + c * hf(x)
    V = lambda x: vb - mp.quad(vprime, [x, b]) if x <= b else vb + eta0 * (x - b)
    return b, V, vprime


b, V, vp = ou_case(mu, theta, sigma, r, kappa, eta0)
header("OU reference problem")
print("b_star", mp.nstr(b, 20))
for x in (0, b / 2, b, 2 * b):
    print("V", mp.nstr(x, 20), mp.nstr(V(x), 20), "V'", mp.nstr(vp(x) if x <= b else eta0, 20))

header("theta sweep")
for th in ("0.25", "0.5", "0.75", "1.0", "1.25", "1.5", "1.75", "2.0"):
    bt, _, _ = ou_case(mu, mp.mpf(th), sigma, r, kappa, eta0)
    print(th, mp.nstr(bt, 16))

# Case B: eta(x) = x, BM mu = 1, sigma = 1, r = 0.5, kappa = 0.5.
header("Case B")
m, s, rr, kap = mp.mpf(1), mp.mpf(1), mp.mpf("0.5"), mp.mpf("0.5")
gp = (-m + mp.sqrt(m * m + 2 * rr * s * s)) / (s * s)
gm = (-m - mp.sqrt(m * m + 2 * rr * s * s)) / (s * s)


def caseb_coeffs(b):
    M = mp.matrix([[gp, gm], [gp * mp.exp(gp * b), gm * mp.exp(gm * b)]])
    return mp.lu_solve(M, mp.matrix([kap, b]))


def caseb_second(b):
    A, B = caseb_coeffs(b)
    return A * gp ** 2 * mp.exp(gp * b) + B * gm ** 2 * mp.exp(gm * b) - 1


bb = mp.findroot(caseb_second, mp.mpf("2.4"))
A, B = caseb_coeffs(bb)
print("gamma+", mp.nstr(gp, 20), "gamma-", mp.nstr(gm, 20))
print("b_star", mp.nstr(bb, 20))
for x in (0, 1, bb):
    print("V", x if x != bb else "b*", mp.nstr(A * mp.exp(gp * x) + B * mp.exp(gm * x), 20))
print("x_bar", mp.nstr(m / rr, 20))

# Running reward pi(x) = x on OU reference problem with alpha = 0.1:
# Pi'(x) = -(2/W)[phi'(x) int_0^x psi pi/(sigma^2 S') + psi'(x) int_x^inf phi pi/(sigma^2 S')].
header("running reward")
nu = -(r + theta) / theta
k = mp.sqrt(2 * theta) / sigma
zz = lambda x: (x - mu / theta) * k
hp = lambda x: mp.exp(zz(x) ** 2 / 4) * mp.pcfd(nu, -zz(x))
hf = lambda x: mp.exp(zz(x) ** 2 / 4) * mp.pcfd(nu, zz(x))
drift = lambda x: mu - theta * x
# psi = (sigma^2/2 psi'' + mu psi')/r with psi' = psi^, and phi likewise with phi' = -phi^.
psi = lambda x: (sigma ** 2 / 2 * mp.diff(hp, x) + drift(x) * hp(x)) / r
phi = lambda x: -(sigma ** 2 / 2 * mp.diff(hf, x) + drift(x) * hf(x)) / r
Sp = lambda x: mp.exp(-(2 / sigma ** 2) * (mu * x - theta * x ** 2 / 2))
W = (hp(0) * phi(0) + hf(0) * psi(0)) / Sp(0)
alpha = mp.mpf("0.1")
pi = lambda x: x


def Pi_prime(x):
    left = mp.quad(lambda y: psi(y) * pi(y) / (sigma ** 2 * Sp(y)), [0, x]) if x > 0 else 0
    right = mp.quad(lambda y: phi(y) * pi(y) / (sigma ** 2 * Sp(y)), [x, x + 5, mp.inf])
    return -(2 / W) * (-hf(x) * left + hp(x) * right)


print("kappa", mp.nstr(Pi_prime(0), 20))
for x in (0, 0.5, 1, 2):
    print("eta", x, mp.nstr(Pi_prime(x) - alpha, 20))

# Hitting Laplace transform for BM mu = 1, sigma = 1, r = 0.5, x = 0.3, n = 1.2.
header("hitting BM")
x, n = mp.mpf("0.3"), mp.mpf("1.2")
den = mp.exp(gm * n) * gp - gm * mp.exp(gp * n)
print("f", mp.nstr((-gm * mp.exp(gp * x) + gp * mp.exp(gm * x)) / den, 20))
