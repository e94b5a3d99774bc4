"""Where the variable-wise score cannot tell two imputers apart.

X1 and X2 are correlated standard normals and never missing together.
Every other column is independent noise, so the companion set of X1 does
not contain X2 and the plain score cannot see the dependence. The
pattern-wise score conditions on X2 and separates the two oracles.

Run: python demos/02_pattern_score.py
"""
from iscore import StarConfig, energy_i_score, energy_i_score_star, generate, make_imputer

complete, masked = generate("strict_propriety", seed=0)
print("companion sets ignore X2 when scoring X1:")
for name in ["oracle_gaussian", "oracle_independent_gaussian"]:
    imputer = make_imputer(name)
    imputed = imputer.fit_impute(masked, 1, seed=1)[0]
    plain = energy_i_score(masked, imputed, imputer, N=50, seed=2)
    star = energy_i_score_star(masked, imputer, StarConfig(N=50, seed=2))
    print(f"  {name:<30} energy-I-Score {plain.aggregate:.4f}   energy-I-Score* {star.aggregate:.4f}")
    print(f"  {'':<30} X1 companions {plain.per_variable['X1'].companions}")
