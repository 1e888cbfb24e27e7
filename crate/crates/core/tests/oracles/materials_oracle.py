"""Independent high-precision evaluation of the frozen material constants.

Run: python3 materials_oracle.py
"""
from mpmath import mp, mpf, mpc, pi, log, exp, sqrt

mp.dps = 40
e = mpf("1.602176634e-19")
kB = mpf("1.380649e-23")
hbar = mpf("1.054571817e-34")
eps0 = mpf("8.8541878128e-12")
c = mpf(299792458)


def kubo(mu_ev, tau, T, f):
    w = 2 * pi * f
    mu = mu_ev * e
    x = mu / (kB * T)
    pref = e**2 * kB * T / (pi * hbar**2)
    return pref * tau / (1 - mpc(0, 1) * w * tau) * (x + 2 * log(1 + exp(-x)))


s = kubo(mpf("0.5"), mpf("1e-12"), mpf(300), mpf("5.5e9"))
print("kubo 0.5eV 1ps 300K 5.5GHz:", mp.nstr(s.real, 17), mp.nstr(s.imag, 17))
b = s / mpf("3e-3")
print("bulk t=3mm:", mp.nstr(b.real, 17), mp.nstr(b.imag, 17))
s0 = kubo(mpf(0), mpf("1e-12"), mpf(300), mpf(0))
print("kubo mu=0 f=0 T=300 tau=1ps:", mp.nstr(s0.real, 17))
print("lcp sigma_eq:", mp.nstr(2 * pi * mpf("5.5e9") * eps0 * mpf("2.9") * mpf("0.0025"), 17))
print("pm sigma_eq:", mp.nstr(2 * pi * mpf("5.5e9") * eps0 * mpf("2.55") * mpf("0.002"), 17))
# degenerate guard: bracket for x = 40, 60
for xv in (40, 60):
    x = mpf(xv)
    print("bracket", xv, mp.nstr(x + 2 * log(1 + exp(-x)), 25))
print("courant dt 0.5mm 0.99:", mp.nstr(mpf("0.99") * mpf("5e-4") / (c * sqrt(3)), 17))
print("patch 19mm eps2:", mp.nstr(c / (2 * mpf("0.019") * sqrt(2)), 17))
