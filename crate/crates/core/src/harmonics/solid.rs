//! Real solid harmonics and the addition theorems that translate expansions.
//!
//! Regular and irregular solid harmonics use Racah normalisation,
//! R̂_ℓm(v) = √(4π/(2ℓ+1)) |v|^ℓ Y_ℓm(v̂) and Î_ℓm(v) = √(4π/(2ℓ+1)) Y_ℓm(v̂)/|v|^{ℓ+1}.
//! The addition theorems are classical in the complex basis; each stencil is
//! derived there once and folded back to a real, sparse table.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use super::{homogeneous_sh, sh_count, sh_index};

/// R̂_ℓm(v) for ℓ ≤ lmax.
pub fn regular_solid(v: [f64; 3], lmax: usize, out: &mut [f64]) {
    homogeneous_sh(v, lmax, out);
    let mut k = 0;
    for l in 0..=lmax {
        let f = (4.0 * PI / (2 * l + 1) as f64).sqrt();
        for _ in 0..2 * l + 1 {
            out[k] *= f;
            k += 1;
        }
    }
}

/// Î_ℓm(v) for ℓ ≤ lmax. `v` must be non-zero.
pub fn irregular_solid(v: [f64; 3], lmax: usize, out: &mut [f64]) {
    homogeneous_sh(v, lmax, out);
    let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    debug_assert!(r2 > 0.0);
    let inv_r2 = 1.0 / r2;
    let mut scale = inv_r2.sqrt();
    let mut k = 0;
    for l in 0..=lmax {
        let f = (4.0 * PI / (2 * l + 1) as f64).sqrt() * scale;
        for _ in 0..2 * l + 1 {
            out[k] *= f;
            k += 1;
        }
        scale *= inv_r2;
    }
}

/// The three translations used by the solver and the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TranslationKind {
    /// Multipole about c_s to local about c_t, vector c_t − c_s.
    MultipoleToLocal,
    /// Multipole about c to multipole about c', vector c' − c.
    MultipoleToMultipole,
    /// Local about c to local about c', vector c' − c.
    LocalToLocal,
}

impl TranslationKind {
    /// Whether the stencil is contracted with irregular harmonics of the vector.
    pub fn uses_irregular(self) -> bool {
        matches!(self, TranslationKind::MultipoleToLocal)
    }
}

/// Sparse real translation table: T[t, s] = Σ c · H_h(vector).
#[derive(Debug)]
pub struct Stencil {
    pub kind: TranslationKind,
    pub lout: usize,
    pub lin: usize,
    /// Degree of the harmonics of the translation vector that are needed.
    pub hdeg: usize,
    pub terms: Vec<(u32, u32, u32, f64)>,
}

impl Stencil {
    pub fn rows(&self) -> usize {
        sh_count(self.lout)
    }

    pub fn cols(&self) -> usize {
        sh_count(self.lin)
    }

    /// Harmonics of the translation vector in the basis this stencil expects.
    pub fn vector_harmonics(&self, v: [f64; 3], h: &mut Vec<f64>) {
        h.resize(sh_count(self.hdeg), 0.0);
        if self.kind.uses_irregular() {
            irregular_solid(v, self.hdeg, h);
        } else {
            regular_solid(v, self.hdeg, h);
        }
    }

    /// Dense row-major matrix for a given vector. `h` is scratch.
    pub fn fill(&self, v: [f64; 3], h: &mut Vec<f64>, t: &mut [f64]) {
        self.vector_harmonics(v, h);
        let cols = self.cols();
        t.fill(0.0);
        for &(row, col, hi, c) in &self.terms {
            t[row as usize * cols + col as usize] += c * h[hi as usize];
        }
    }
}

/// Dense translation matrix (rows: output degree ≤ lout, cols: input degree ≤ lin).
pub fn translation_matrix(kind: TranslationKind, lout: usize, lin: usize, v: [f64; 3]) -> Vec<f64> {
    let st = stencil(kind, lout, lin);
    let mut t = vec![0.0; st.rows() * st.cols()];
    let mut h = Vec::new();
    st.fill(v, &mut h, &mut t);
    t
}

type StencilKey = (TranslationKind, usize, usize);

/// Shared, lazily built stencil.
pub fn stencil(kind: TranslationKind, lout: usize, lin: usize) -> Arc<Stencil> {
    static CACHE: OnceLock<Mutex<HashMap<StencilKey, Arc<Stencil>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().unwrap().get(&(kind, lout, lin)) {
        return s.clone();
    }
    let built = Arc::new(build_stencil(kind, lout, lin));
    cache.lock().unwrap().entry((kind, lout, lin)).or_insert(built).clone()
}

struct Binomials {
    n: usize,
    table: Vec<f64>,
}

impl Binomials {
    fn new(n: usize) -> Self {
        let mut table = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..=n {
            table[i * (n + 1)] = 1.0;
            for k in 1..=i {
                table[i * (n + 1) + k] =
                    table[(i - 1) * (n + 1) + k - 1] + if k < i { table[(i - 1) * (n + 1) + k] } else { 0.0 };
            }
        }
        Self { n, table }
    }

    fn get(&self, n: i64, k: i64) -> f64 {
        if n < 0 || k < 0 || k > n {
            return 0.0;
        }
        assert!(n as usize <= self.n);
        self.table[n as usize * (self.n + 1) + k as usize]
    }
}

/// Complex harmonic Y^μ in terms of real ones: Y^μ = Σ w · Y_(ℓ,q).
fn complex_to_real(mu: i64) -> Vec<(i64, Complex64)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let k = mu.abs();
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    if mu == 0 {
        vec![(0, Complex64::new(1.0, 0.0))]
    } else if mu > 0 {
        vec![(k, Complex64::new(sign * h, 0.0)), (-k, Complex64::new(0.0, sign * h))]
    } else {
        vec![(k, Complex64::new(h, 0.0)), (-k, Complex64::new(0.0, -h))]
    }
}

/// Real harmonic Y_(ℓ,m) in terms of complex ones: Y_m = Σ u · Y^μ.
fn real_to_complex(m: i64) -> Vec<(i64, Complex64)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let k = m.abs();
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    if m == 0 {
        vec![(0, Complex64::new(1.0, 0.0))]
    } else if m > 0 {
        vec![(k, Complex64::new(sign * h, 0.0)), (-k, Complex64::new(h, 0.0))]
    } else {
        vec![(k, Complex64::new(0.0, -sign * h)), (-k, Complex64::new(0.0, h))]
    }
}

/// Complex orders ν whose harmonic has a component along real order κ.
fn complex_orders_of(kappa: i64) -> Vec<(i64, Complex64)> {
    // W[ν, κ] for ν = ±|κ|.
    let k = kappa.abs();
    let mut out = Vec::new();
    for nu in if k == 0 { vec![0] } else { vec![k, -k] } {
        for (q, w) in complex_to_real(nu) {
            if q == kappa {
                out.push((nu, w));
            }
        }
    }
    out
}

fn build_stencil(kind: TranslationKind, lout: usize, lin: usize) -> Stencil {
    let hdeg = match kind {
        TranslationKind::MultipoleToLocal => lout + lin,
        TranslationKind::MultipoleToMultipole => lout,
        TranslationKind::LocalToLocal => lin,
    };
    let binom = Binomials::new(2 * (lout + lin) + 2);
    let mut acc: HashMap<(u32, u32, u32), Complex64> = HashMap::new();
    let mut add = |t: usize, s: usize, n: usize, q: i64, c: Complex64| {
        for (qr, w) in complex_to_real(q) {
            let h = sh_index(n, qr) as u32;
            *acc.entry((t as u32, s as u32, h)).or_default() += c * w;
        }
    };

    for l in 0..=lin {
        let li = l as i64;
        for m in -li..=li {
            let s = sh_index(l, m);
            for (mu, u) in real_to_complex(m) {
                match kind {
                    TranslationKind::MultipoleToLocal => {
                        // I_ℓ^μ(r + a) = Σ (−1)^{λ+ν} √(C(ℓ+λ−μ+ν, λ+ν) C(ℓ+λ+μ−ν, λ−ν)) R_λ^ν(r) I_{ℓ+λ}^{μ−ν}(a)
                        for lam in 0..=lout {
                            let la = lam as i64;
                            for kappa in -la..=la {
                                let t = sh_index(lam, kappa);
                                for (nu, w) in complex_orders_of(kappa) {
                                    let c = binom.get(li + la - mu + nu, la + nu)
                                        * binom.get(li + la + mu - nu, la - nu);
                                    if c == 0.0 {
                                        continue;
                                    }
                                    let sign = if (la + nu).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                                    add(t, s, l + lam, mu - nu, u * w * (sign * c.sqrt()));
                                }
                            }
                        }
                    }
                    TranslationKind::MultipoleToMultipole => {
                        // Same theorem read as an expansion in I_{ℓ+λ}(X) with R_λ(b) as coefficient.
                        for lam in 0..=lout.saturating_sub(l) {
                            let la = lam as i64;
                            let n = l + lam;
                            for nu in -la..=la {
                                let c = binom.get(li + la - mu + nu, la + nu)
                                    * binom.get(li + la + mu - nu, la - nu);
                                if c == 0.0 || (mu - nu).unsigned_abs() as usize > n {
                                    continue;
                                }
                                let sign = if (la + nu).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                                let base = u * (sign * c.sqrt());
                                // Output harmonic I_n^{μ−ν}(X) expands in real Î_n,q'.
                                for (qo, wo) in complex_to_real(mu - nu) {
                                    let t = sh_index(n, qo);
                                    add(t, s, lam, nu, base * wo);
                                }
                            }
                        }
                    }
                    TranslationKind::LocalToLocal => {
                        // R_ℓ^μ(r + a) = Σ_{λ≤ℓ} √(C(ℓ+μ, λ+ν) C(ℓ−μ, λ−ν)) R_λ^ν(r) R_{ℓ−λ}^{μ−ν}(a)
                        for lam in 0..=l.min(lout) {
                            let la = lam as i64;
                            for kappa in -la..=la {
                                let t = sh_index(lam, kappa);
                                for (nu, w) in complex_orders_of(kappa) {
                                    let c = binom.get(li + mu, la + nu) * binom.get(li - mu, la - nu);
                                    if c == 0.0 {
                                        continue;
                                    }
                                    add(t, s, l - lam, mu - nu, u * w * c.sqrt());
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let mut terms: Vec<(u32, u32, u32, f64)> = acc
        .into_iter()
        .filter_map(|((t, s, h), c)| {
            assert!(
                c.im.abs() <= 1e-9 * (1.0 + c.re.abs()),
                "translation coefficient is not real: {c}"
            );
            (c.re.abs() > 1e-14 * (1.0 + c.norm())).then_some((t, s, h, c.re))
        })
        .collect();
    terms.sort_unstable_by_key(|&(t, s, h, _)| (t, s, h));
    Stencil { kind, lout, lin, hdeg, terms }
}
