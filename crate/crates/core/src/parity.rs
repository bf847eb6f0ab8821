//! Single-query parity decision for cyclic permutations of d objects.
//!
//! The oracle family has 2d members: the d index shifts x ↦ x + k
//! (positive cyclic) and the d reflections x ↦ k − x (negative cyclic),
//! both taken mod d on 1-based labels. Preparing U_FT|2⟩, querying the
//! oracle once and undoing the Fourier gate leaves the register in |2⟩ for
//! a shift and in |d⟩ for a reflection.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};
use crate::qudit::{fourier_unitary, measure_distribution, QuditState, Unitary};

/// Probability mass required on the winning level.
pub const DECISION_TOL: f64 = 1e-10;

/// Largest dimension accepted by [`classical_single_query_check`].
pub const MAX_ENUMERATION_DIM: usize = 12;

/// Largest dimension for which a two-query witness is searched.
pub const MAX_TWO_QUERY_DIM: usize = 6;

/// A bijection on {1..d}, stored as `map[x-1] = f(x)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let d = map.len();
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let mut seen = vec![false; d];
        for &v in &map {
            if v == 0 || v > d {
                return Err(Error::InvalidPermutation(format!("value {v} outside 1..={d}")));
            }
            if std::mem::replace(&mut seen[v - 1], true) {
                return Err(Error::InvalidPermutation(format!("value {v} repeated in {map:?}")));
            }
        }
        Ok(Self { map })
    }

    /// f_k(x) = ((x − 1 + k) mod d) + 1.
    pub fn shift(d: usize, k: usize) -> Result<Self> {
        Self::new((1..=d).map(|x| (x - 1 + k) % d + 1).collect())
    }

    /// g_k(x) = ((k − x) mod d) + 1.
    pub fn reflection(d: usize, k: usize) -> Result<Self> {
        let d_i = d as i64;
        Self::new((1..=d as i64).map(|x| ((k as i64 - x).rem_euclid(d_i) + 1) as usize).collect())
    }

    /// The eight ququart oracles in their conventional order U1..U8.
    pub fn ququart_oracle(index: usize) -> Result<Self> {
        match index {
            1..=4 => Self::shift(4, index - 1),
            // U5..U8 are the reflections g_0, g_3, g_2, g_1
            5..=8 => Self::reflection(4, (4 - (index - 5)) % 4),
            _ => Err(Error::InvalidParameter(format!("ququart oracle index {index} not in 1..=8"))),
        }
    }

    /// Parses `U1`..`U8` (d = 4 only), `shift:k`, `reflect:k` or a JSON array.
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        let s = text.trim();
        if s.starts_with('[') {
            let map: Vec<usize> = serde_json::from_str(s)?;
            if map.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: map.len() });
            }
            return Self::new(map);
        }
        if let Some(rest) = s.strip_prefix('U').or_else(|| s.strip_prefix('u')) {
            if d != 4 {
                return Err(Error::InvalidParameter(format!("label {s} only names ququart oracles")));
            }
            let i = rest.parse().map_err(|_| Error::InvalidParameter(format!("bad oracle label {s}")))?;
            return Self::ququart_oracle(i);
        }
        let (kind, k) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("unrecognized permutation {s}")))?;
        let k: usize = k.parse().map_err(|_| Error::InvalidParameter(format!("bad family index in {s}")))?;
        if k >= d {
            return Err(Error::InvalidParameter(format!("family index {k} must be below d = {d}")));
        }
        match kind {
            "shift" => Self::shift(d, k),
            "reflect" | "reflection" => Self::reflection(d, k),
            _ => Err(Error::InvalidParameter(format!("unknown family {kind}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// f(x) for 1-based `x`.
    pub fn eval(&self, x: usize) -> usize {
        self.map[x - 1]
    }

    /// (self ∘ other)(x) = self(other(x)).
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Permutation { map: other.map.iter().map(|&y| self.eval(y)).collect() })
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.map.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CyclicClass {
    PositiveCyclic,
    NegativeCyclic,
}

impl fmt::Display for CyclicClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CyclicClass::PositiveCyclic => "positive cyclic",
            CyclicClass::NegativeCyclic => "negative cyclic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleMember {
    pub label: String,
    pub class: CyclicClass,
    /// Shift amount or reflection offset `k`.
    pub family_index: usize,
    pub permutation: Permutation,
}

/// The 2d admissible oracles for dimension d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSet {
    dim: usize,
    members: Vec<OracleMember>,
}

impl OracleSet {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let mut members = Vec::with_capacity(2 * d);
        if d == 4 {
            for i in 1..=8 {
                let p = Permutation::ququart_oracle(i)?;
                let (class, k) = if i <= 4 {
                    (CyclicClass::PositiveCyclic, i - 1)
                } else {
                    (CyclicClass::NegativeCyclic, (4 - (i - 5)) % 4)
                };
                members.push(OracleMember { label: format!("U{i}"), class, family_index: k, permutation: p });
            }
        } else {
            for k in 0..d {
                members.push(OracleMember {
                    label: format!("shift:{k}"),
                    class: CyclicClass::PositiveCyclic,
                    family_index: k,
                    permutation: Permutation::shift(d, k)?,
                });
            }
            for k in 0..d {
                members.push(OracleMember {
                    label: format!("reflect:{k}"),
                    class: CyclicClass::NegativeCyclic,
                    family_index: k,
                    permutation: Permutation::reflection(d, k)?,
                });
            }
        }
        Ok(Self { dim: d, members })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn members(&self) -> &[OracleMember] {
        &self.members
    }

    pub fn of_class(&self, class: CyclicClass) -> impl Iterator<Item = &OracleMember> {
        self.members.iter().filter(move |m| m.class == class)
    }

    /// First member equal to `p`; shifts are listed before reflections.
    pub fn find(&self, p: &Permutation) -> Option<&OracleMember> {
        self.members.iter().find(|m| &m.permutation == p)
    }

    /// For d = 2 the two families are the same set, so the task is void.
    pub fn is_degenerate(&self) -> bool {
        self.dim == 2
    }
}

/// Permutation matrix with U|x⟩ = |f(x)⟩.
pub fn permutation_unitary(p: &Permutation) -> Unitary {
    let d = p.dim();
    let mut m = CMat::from_element(d, d, ZERO);
    for x in 1..=d {
        m[(p.eval(x) - 1, x - 1)] = ONE;
    }
    Unitary::from_matrix_unchecked(m)
}

/// Reference classifier by family membership.
///
/// For d = 2 every member lies in both families and the positive label is
/// returned.
pub fn classify_classically(p: &Permutation, oracle_set: &OracleSet) -> Result<CyclicClass> {
    if p.dim() != oracle_set.dim() {
        return Err(Error::DimensionMismatch { expected: oracle_set.dim(), found: p.dim() });
    }
    oracle_set
        .find(p)
        .map(|m| m.class)
        .ok_or_else(|| Error::Inadmissible { map: p.map().to_vec(), dim: p.dim() })
}

/// The three factors of the single-query circuit, in application order.
#[derive(Clone, Debug)]
pub struct ParityCircuit {
    pub fourier: Unitary,
    pub oracle: Unitary,
    pub inverse_fourier: Unitary,
}

impl ParityCircuit {
    pub fn new(p: &Permutation) -> Result<Self> {
        let fourier = fourier_unitary(p.dim())?;
        let inverse_fourier = fourier.dagger();
        Ok(Self { fourier, oracle: permutation_unitary(p), inverse_fourier })
    }

    /// U_FT† · U_p · U_FT.
    pub fn composed(&self) -> Unitary {
        Unitary::from_matrix_unchecked(
            self.inverse_fourier.matrix() * self.oracle.matrix() * self.fourier.matrix(),
        )
    }

    /// Runs the circuit on `input`, applying the oracle exactly once.
    pub fn run(&self, input: &QuditState) -> Result<QuditState> {
        let superposed = self.fourier.apply(input)?;
        let queried = self.oracle.apply(&superposed)?;
        self.inverse_fourier.apply(&queried)
    }
}

/// Outcome of one run of the quantum algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityRun {
    pub class: CyclicClass,
    pub final_state: QuditState,
    /// 1-based level holding the probability mass.
    pub outcome_index: usize,
    pub probability: f64,
    /// Set for d = 2, where both classes land on the same level.
    pub degenerate: bool,
}

/// Decides the class of `p` with one oracle application.
pub fn run_parity_algorithm(p: &Permutation) -> Result<ParityRun> {
    let d = p.dim();
    if OracleSet::new(d)?.find(p).is_none() {
        return Err(Error::Inadmissible { map: p.map().to_vec(), dim: d });
    }
    let circuit = ParityCircuit::new(p)?;
    let final_state = circuit.run(&QuditState::basis(d, 2)?)?;
    let (index, probability) = measure_distribution(&final_state)
        .into_iter()
        .map(|o| (o.basis_index, o.probability))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    if probability < 1.0 - DECISION_TOL {
        return Err(Error::AmbiguousOutcome { index, probability });
    }
    let class = if index == 2 {
        CyclicClass::PositiveCyclic
    } else if index == d {
        CyclicClass::NegativeCyclic
    } else {
        return Err(Error::AmbiguousOutcome { index, probability });
    };
    Ok(ParityRun { class, final_state, outcome_index: index, probability, degenerate: d == 2 })
}

/// Global phase φ with U_p|ψ₂⟩ = φ|ψ_target⟩, where the target is |ψ₂⟩ for a
/// shift and |ψ_d⟩ = U_FT|d⟩ for a reflection.
pub fn oracle_phase(p: &Permutation) -> Result<C64> {
    let d = p.dim();
    let set = OracleSet::new(d)?;
    let class = classify_classically(p, &set)?;
    let fourier = fourier_unitary(d)?;
    let psi2 = fourier.apply(&QuditState::basis(d, 2)?)?;
    let target_label = match class {
        CyclicClass::PositiveCyclic => 2,
        CyclicClass::NegativeCyclic => d,
    };
    let target = fourier.apply(&QuditState::basis(d, target_label)?)?;
    let image = permutation_unitary(p).apply(&psi2)?;
    target.inner(&image)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryVerdict {
    #[serde(rename = "single query insufficient")]
    SingleQueryInsufficient,
    #[serde(rename = "single query sufficient")]
    SingleQuerySufficient,
}

/// One cell of the classical collision table: evaluating f at `x` returned `value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryCell {
    pub x: usize,
    pub value: usize,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub collision: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalQueryReport {
    pub dim: usize,
    pub table: Vec<QueryCell>,
    /// Query points at which some observed value is shared by both classes.
    pub colliding_queries: Vec<usize>,
    pub verdict: QueryVerdict,
    pub degenerate: bool,
    pub quantum_advantage: bool,
    /// A pair of query points that always decides the class, searched for d ≤ 6.
    pub two_query_witness: Option<(usize, usize)>,
}

/// Enumerates every (query point, value) pair to decide whether a single
/// classical evaluation can ever separate the two families.
pub fn classical_single_query_check(d: usize) -> Result<ClassicalQueryReport> {
    if !(2..=MAX_ENUMERATION_DIM).contains(&d) {
        return Err(Error::InvalidParameter(format!(
            "enumeration supports 2 <= d <= {MAX_ENUMERATION_DIM}, got {d}"
        )));
    }
    let set = OracleSet::new(d)?;
    let mut table = Vec::with_capacity(d * d);
    let mut colliding_queries = Vec::new();
    for x in 1..=d {
        let mut any = false;
        for value in 1..=d {
            let labels = |class| -> Vec<String> {
                set.of_class(class)
                    .filter(|m| m.permutation.eval(x) == value)
                    .map(|m| m.label.clone())
                    .collect()
            };
            let positive = labels(CyclicClass::PositiveCyclic);
            let negative = labels(CyclicClass::NegativeCyclic);
            let collision = !positive.is_empty() && !negative.is_empty();
            any |= collision;
            table.push(QueryCell { x, value, positive, negative, collision });
        }
        if any {
            colliding_queries.push(x);
        }
    }
    let verdict = if colliding_queries.len() == d {
        QueryVerdict::SingleQueryInsufficient
    } else {
        QueryVerdict::SingleQuerySufficient
    };
    let degenerate = set.is_degenerate();
    let two_query_witness = if d <= MAX_TWO_QUERY_DIM { two_query_witness(&set) } else { None };
    Ok(ClassicalQueryReport {
        dim: d,
        table,
        colliding_queries,
        verdict,
        degenerate,
        quantum_advantage: !degenerate && verdict == QueryVerdict::SingleQueryInsufficient,
        two_query_witness,
    })
}

fn two_query_witness(set: &OracleSet) -> Option<(usize, usize)> {
    let d = set.dim();
    let answers = |class, a, b| -> Vec<(usize, usize)> {
        set.of_class(class).map(|m| (m.permutation.eval(a), m.permutation.eval(b))).collect()
    };
    for a in 1..=d {
        for b in a + 1..=d {
            let pos = answers(CyclicClass::PositiveCyclic, a, b);
            let neg = answers(CyclicClass::NegativeCyclic, a, b);
            if pos.iter().all(|p| !neg.contains(p)) {
                return Some((a, b));
            }
        }
    }
    None
}
