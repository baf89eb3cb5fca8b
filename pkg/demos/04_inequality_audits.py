"""Randomized audits of the three functional inequalities behind the proof.

* gradient bound: the nonlocal quadratic form of phi is controlled by
  (int rho z^2) |phi_x|^2 at every scale lam;
* balance: |u|_2^2 <= eps n^2 Q_n(u) + (2/eps) |u|_{H^-1}^2 once n is large;
* cutoff: multiplying by a smooth bump chi costs at most the explicit constants.

Every trial draws a fresh random field from its own child seed, so a failing
trial can be replayed from (seed, trial index). Set NLCD_THREADS to run the
trials in parallel.
"""
from nlcd import audit_balance, audit_est_ariba, audit_local_sup

for audit, seed in ((audit_est_ariba, 1), (audit_balance, 2), (audit_local_sup, 3)):
    r = audit(1000, seed)
    print(f"{r.lemma_id:10s} trials={r.trials} violations={r.violations} "
          f"tightest relative margin={r.worst_rel_margin:.2e} seed={r.seed}")

# The gradient bound runs close to equality for slowly varying fields. The
# tightest margin is below 1e-3, yet it is never negative, because both sides
# use the same forward differences and the same discrete kernel moment.
