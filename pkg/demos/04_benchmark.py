import numpy as np

from holodescent.cli import BenchSpec, bench, format_table

# Paired runtime comparison on samples from theta = (2.12, 2.12).
# Each trial draws one sample and hands it to every method.
rows, table = bench(BenchSpec(trials=100, theta=np.array([2.12, 2.12]), n=100, seed=1))
print(format_table(table))

hgd = np.array([r["seconds"] for r in rows if r["method"] == "hgd"])
newton = np.array([r["seconds"] for r in rows if r["method"] == "newton"])
print("\nHGD faster than Newton in %d of %d trials" % ((hgd < newton).sum(), hgd.size))
print("median speed-up: %.2fx" % np.median(newton / hgd))
