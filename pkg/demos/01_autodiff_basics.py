"""A tour of the reverse-mode autodiff core.

Builds a few small graphs, backpropagates, and cross-checks one gradient
against central finite differences.
"""

import numpy as np

from kbdialog import autodiff as ad

# --- forward + backward on a tiny expression -------------------------------
# loss = sum(tanh(W @ x))
rng = np.random.default_rng(0)
w = ad.param(rng.normal(size=(3, 4)), name="w")
x = ad.param(rng.normal(size=4), name="x")
loss = ad.reduce_sum(ad.tanh(ad.matmul(w, x)))
grads = ad.backward(loss)
print("loss:", float(loss.value))
print("grad wrt x:", grads[x])

# --- the same gradient by central finite differences ------------------------
eps = 1e-6
numeric = np.zeros(4)
for j in range(4):
    bump = x.value.copy()
    bump[j] += eps
    hi = np.tanh(w.value @ bump).sum()
    bump[j] -= 2 * eps
    lo = np.tanh(w.value @ bump).sum()
    numeric[j] = (hi - lo) / (2 * eps)
print("finite differences agree:", np.allclose(grads[x], numeric, atol=1e-8))

# --- softmax keeps its mass, sharing a node sums gradients -------------------
p = ad.softmax(ad.constant([1.0, 2.0, 3.0]), axis=0)
print("softmax sums to", float(p.value.sum()))

shared = ad.param(np.array([0.5, -1.0]), name="shared")
two_paths = ad.add(ad.reduce_sum(ad.mul(shared, shared)),
                   ad.reduce_sum(shared))
print("d/dx (x*x + x) =", ad.backward(two_paths)[shared], "(= 2x + 1)")

# --- Adam minimizes a quadratic ---------------------------------------------
point = ad.param(np.array([2.0, -1.5]), name="p")
opt = ad.Adam({"p": point}, lr=0.05)
for step in range(200):
    opt.step({"p": np.array([3.0, 1.0]) * point.value})
print("after 200 Adam steps on a quadratic:", point.value)
