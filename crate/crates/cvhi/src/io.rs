//! Problem, result, and oracle files. JSON with tagged objects, unknown
//! fields rejected, and a canonical serialization: parse-then-serialize
//! is byte-stable from the first normalization on. Non-finite gap values
//! are carried as nulls since JSON has no infinities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::functions::{ConvexExtendedFunction, MaxSmoothBifunction, Piece, Term};
use crate::gap::{GapReport, GapValue};
use crate::hypotheses::HypothesisReport;
use crate::operators::{CoercivityProfile, CoupledOperator};
use crate::oracle::{OracleOutcome, SolutionSetProbes};
use crate::outer::{Solution, SolveTrace};
use crate::problem::{CoupledProblem, SpecialCaseKind};
use crate::spaces::{ConvexSet, LinearMap, SpaceLayout};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SetDto {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Polytope {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Whole,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum OperatorDto {
    Affine {
        #[serde(rename = "P")]
        p: Vec<Vec<f64>>,
        #[serde(rename = "K")]
        k: Vec<Vec<f64>>,
        a: Vec<f64>,
    },
    MonotoneGradient {
        coeff: f64,
        #[serde(rename = "K")]
        k: Vec<Vec<f64>>,
        a: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PieceDto {
    Affine {
        g_p: Vec<f64>,
        g_x: Vec<f64>,
        b: f64,
    },
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        #[serde(rename = "R")]
        r: Vec<Vec<f64>>,
        g_x: Vec<f64>,
        g_p: Vec<f64>,
        b: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
enum BifunctionDto {
    #[serde(rename = "maxsmooth")]
    MaxSmooth { pieces: Vec<PieceDto> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum TermDto {
    Zero,
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        #[serde(rename = "q")]
        lin: Vec<f64>,
        c: f64,
    },
    WeightedL1 {
        weight: f64,
    },
    NormL2 {
        weight: f64,
    },
    Indicator {
        set: SetDto,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvexDto {
    terms: Vec<TermDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ProfileDto {
    Linear { a: f64, b: f64, c: f64 },
    UserTable {
        ts: Vec<f64>,
        ss: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutDto {
    n_v: usize,
    n_e: usize,
    n_x: usize,
    n_y: usize,
    n_z1: usize,
    n_z2: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDefaults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    format_version: u32,
    layout: LayoutDto,
    op_a: OperatorDto,
    op_b: OperatorDto,
    j_fun: BifunctionDto,
    h_fun: BifunctionDto,
    psi: ConvexDto,
    theta: ConvexDto,
    set_c: SetDto,
    set_d: SetDto,
    gamma1: Vec<Vec<f64>>,
    gamma2: Vec<Vec<f64>>,
    delta1: Vec<Vec<f64>>,
    delta2: Vec<Vec<f64>>,
    rhs_h: Vec<f64>,
    rhs_l: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchor_u0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchor_w0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile_a: Option<ProfileDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile_b: Option<ProfileDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<SpecialCaseKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDefaults>,
}

fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_mat(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Input(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Input(format!("{what}: ragged or empty rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn expect_dims(m: &DMatrix<f64>, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Input(format!(
            "{what}: expected {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn set_dto(s: &ConvexSet) -> SetDto {
    match s {
        ConvexSet::Box { lo, hi } => SetDto::Box {
            lo: lo.iter().cloned().collect(),
            hi: hi.iter().cloned().collect(),
        },
        ConvexSet::Ball { center, radius } => SetDto::Ball {
            center: center.iter().cloned().collect(),
            radius: *radius,
        },
        ConvexSet::Polytope { a, b, .. } => SetDto::Polytope {
            a: mat_rows(a),
            b: b.iter().cloned().collect(),
        },
        ConvexSet::WholeSpace { .. } => SetDto::Whole,
    }
}

fn set_from(dto: &SetDto, dim: usize, what: &str) -> Result<ConvexSet> {
    let check = |n: usize| {
        if n != dim {
            Err(Error::Input(format!("{what}: expected dimension {dim}, got {n}")))
        } else {
            Ok(())
        }
    };
    match dto {
        SetDto::Box { lo, hi } => {
            check(lo.len())?;
            check(hi.len())?;
            ConvexSet::make_box(DVector::from_vec(lo.clone()), DVector::from_vec(hi.clone()))
        }
        SetDto::Ball { center, radius } => {
            check(center.len())?;
            ConvexSet::make_ball(DVector::from_vec(center.clone()), *radius)
        }
        SetDto::Polytope { a, b } => {
            let a = rows_mat(a, what)?;
            check(a.ncols())?;
            ConvexSet::make_polytope(a, DVector::from_vec(b.clone()))
        }
        SetDto::Whole => Ok(ConvexSet::whole(dim)),
    }
}

fn op_dto(op: &CoupledOperator) -> OperatorDto {
    match op {
        CoupledOperator::Affine { p, k, a } => OperatorDto::Affine {
            p: mat_rows(p),
            k: mat_rows(k),
            a: a.iter().cloned().collect(),
        },
        CoupledOperator::MonotoneGradient { coeff, k, a } => OperatorDto::MonotoneGradient {
            coeff: *coeff,
            k: mat_rows(k),
            a: a.iter().cloned().collect(),
        },
    }
}

fn op_from(dto: &OperatorDto, n_out: usize, n_par: usize, what: &str) -> Result<CoupledOperator> {
    match dto {
        OperatorDto::Affine { p, k, a } => {
            let p = rows_mat(p, what)?;
            let k = rows_mat(k, what)?;
            expect_dims(&p, n_out, n_out, what)?;
            expect_dims(&k, n_out, n_par, what)?;
            if a.len() != n_out {
                return Err(Error::Input(format!(
                    "{what}: offset has {} entries, expected {n_out}",
                    a.len()
                )));
            }
            Ok(CoupledOperator::Affine {
                p,
                k,
                a: DVector::from_vec(a.clone()),
            })
        }
        OperatorDto::MonotoneGradient { coeff, k, a } => {
            let k = rows_mat(k, what)?;
            expect_dims(&k, n_out, n_par, what)?;
            if a.len() != n_out {
                return Err(Error::Input(format!(
                    "{what}: offset has {} entries, expected {n_out}",
                    a.len()
                )));
            }
            Ok(CoupledOperator::MonotoneGradient {
                coeff: *coeff,
                k,
                a: DVector::from_vec(a.clone()),
            })
        }
    }
}

fn piece_dto(p: &Piece) -> PieceDto {
    match p {
        Piece::Affine { g_p, g_x, b } => PieceDto::Affine {
            g_p: g_p.iter().cloned().collect(),
            g_x: g_x.iter().cloned().collect(),
            b: *b,
        },
        Piece::Quadratic { q, r, g_x, g_p, b } => PieceDto::Quadratic {
            q: mat_rows(q),
            r: mat_rows(r),
            g_x: g_x.iter().cloned().collect(),
            g_p: g_p.iter().cloned().collect(),
            b: *b,
        },
    }
}

fn bif_dto(b: &MaxSmoothBifunction) -> BifunctionDto {
    BifunctionDto::MaxSmooth {
        pieces: b.pieces.iter().map(piece_dto).collect(),
    }
}

fn bif_from(dto: &BifunctionDto, n_p: usize, n_x: usize, what: &str) -> Result<MaxSmoothBifunction> {
    let BifunctionDto::MaxSmooth { pieces } = dto;
    if pieces.is_empty() {
        return Ok(MaxSmoothBifunction::zero(n_p, n_x));
    }
    let mut out = Vec::with_capacity(pieces.len());
    for (i, pc) in pieces.iter().enumerate() {
        let tag = format!("{what}.pieces[{i}]");
        let err = |n: usize, want: usize, slot: &str| {
            Error::Input(format!("{tag}: {slot} has {n} entries, expected {want}"))
        };
        match pc {
            PieceDto::Affine { g_p, g_x, b } => {
                if g_p.len() != n_p {
                    return Err(err(g_p.len(), n_p, "g_p"));
                }
                if g_x.len() != n_x {
                    return Err(err(g_x.len(), n_x, "g_x"));
                }
                out.push(Piece::Affine {
                    g_p: DVector::from_vec(g_p.clone()),
                    g_x: DVector::from_vec(g_x.clone()),
                    b: *b,
                });
            }
            PieceDto::Quadratic { q, r, g_x, g_p, b } => {
                let q = rows_mat(q, &tag)?;
                let r = rows_mat(r, &tag)?;
                expect_dims(&q, n_x, n_x, &tag)?;
                expect_dims(&r, n_x, n_p, &tag)?;
                if g_p.len() != n_p {
                    return Err(err(g_p.len(), n_p, "g_p"));
                }
                if g_x.len() != n_x {
                    return Err(err(g_x.len(), n_x, "g_x"));
                }
                out.push(Piece::Quadratic {
                    q,
                    r,
                    g_x: DVector::from_vec(g_x.clone()),
                    g_p: DVector::from_vec(g_p.clone()),
                    b: *b,
                });
            }
        }
    }
    MaxSmoothBifunction::new(n_p, n_x, out)
}

fn term_dto(t: &Term) -> TermDto {
    match t {
        Term::Zero => TermDto::Zero,
        Term::Quadratic { q_mat, q_vec, c } => TermDto::Quadratic {
            q: mat_rows(q_mat),
            lin: q_vec.iter().cloned().collect(),
            c: *c,
        },
        Term::WeightedL1 { weight } => TermDto::WeightedL1 { weight: *weight },
        Term::NormL2 { weight } => TermDto::NormL2 { weight: *weight },
        Term::Indicator { set } => TermDto::Indicator { set: set_dto(set) },
    }
}

fn convex_dto(f: &ConvexExtendedFunction) -> ConvexDto {
    ConvexDto {
        terms: f.terms.iter().map(term_dto).collect(),
    }
}

fn convex_from(dto: &ConvexDto, dim: usize, what: &str) -> Result<ConvexExtendedFunction> {
    let mut terms = Vec::with_capacity(dto.terms.len());
    for (i, t) in dto.terms.iter().enumerate() {
        let tag = format!("{what}.terms[{i}]");
        terms.push(match t {
            TermDto::Zero => Term::Zero,
            TermDto::Quadratic { q, lin, c } => {
                let q = rows_mat(q, &tag)?;
                expect_dims(&q, dim, dim, &tag)?;
                if lin.len() != dim {
                    return Err(Error::Input(format!(
                        "{tag}: linear part has {} entries, expected {dim}",
                        lin.len()
                    )));
                }
                Term::Quadratic {
                    q_mat: q,
                    q_vec: DVector::from_vec(lin.clone()),
                    c: *c,
                }
            }
            TermDto::WeightedL1 { weight } => Term::WeightedL1 { weight: *weight },
            TermDto::NormL2 { weight } => Term::NormL2 { weight: *weight },
            TermDto::Indicator { set } => Term::Indicator {
                set: set_from(set, dim, &tag)?,
            },
        });
    }
    Ok(ConvexExtendedFunction::new(terms))
}

fn profile_dto(p: &CoercivityProfile) -> ProfileDto {
    match p {
        CoercivityProfile::Linear { a, b, c } => ProfileDto::Linear {
            a: *a,
            b: *b,
            c: *c,
        },
        CoercivityProfile::UserTable { ts, ss, values } => ProfileDto::UserTable {
            ts: ts.clone(),
            ss: ss.clone(),
            values: values.clone(),
        },
    }
}

fn profile_from(dto: &ProfileDto) -> CoercivityProfile {
    match dto {
        ProfileDto::Linear { a, b, c } => CoercivityProfile::Linear {
            a: *a,
            b: *b,
            c: *c,
        },
        ProfileDto::UserTable { ts, ss, values } => CoercivityProfile::UserTable {
            ts: ts.clone(),
            ss: ss.clone(),
            values: values.clone(),
        },
    }
}

fn vec_from(v: &[f64], dim: usize, what: &str) -> Result<DVector<f64>> {
    if v.len() != dim {
        return Err(Error::Input(format!(
            "{what}: has {} entries, expected {dim}",
            v.len()
        )));
    }
    Ok(DVector::from_vec(v.to_vec()))
}

pub fn problem_to_file(p: &CoupledProblem) -> ProblemFile {
    ProblemFile {
        format_version: FORMAT_VERSION,
        layout: LayoutDto {
            n_v: p.layout.n_v,
            n_e: p.layout.n_e,
            n_x: p.layout.n_x,
            n_y: p.layout.n_y,
            n_z1: p.layout.n_z1,
            n_z2: p.layout.n_z2,
        },
        op_a: op_dto(&p.op_a),
        op_b: op_dto(&p.op_b),
        j_fun: bif_dto(&p.j_fun),
        h_fun: bif_dto(&p.h_fun),
        psi: convex_dto(&p.psi),
        theta: convex_dto(&p.theta),
        set_c: set_dto(&p.set_c),
        set_d: set_dto(&p.set_d),
        gamma1: mat_rows(p.gamma1.matrix()),
        gamma2: mat_rows(p.gamma2.matrix()),
        delta1: mat_rows(p.delta1.matrix()),
        delta2: mat_rows(p.delta2.matrix()),
        rhs_h: p.rhs_h.iter().cloned().collect(),
        rhs_l: p.rhs_l.iter().cloned().collect(),
        anchor_u0: p.anchor_u0.as_ref().map(|v| v.iter().cloned().collect()),
        anchor_w0: p.anchor_w0.as_ref().map(|v| v.iter().cloned().collect()),
        profile_a: p.profile_a.as_ref().map(profile_dto),
        profile_b: p.profile_b.as_ref().map(profile_dto),
        kind: p.kind,
        solver: None,
    }
}

pub fn problem_from_file(f: &ProblemFile) -> Result<CoupledProblem> {
    if f.format_version != FORMAT_VERSION {
        return Err(Error::Input(format!(
            "format_version {} is not supported (expected {FORMAT_VERSION})",
            f.format_version
        )));
    }
    let l = &f.layout;
    let layout = SpaceLayout {
        n_v: l.n_v,
        n_e: l.n_e,
        n_x: l.n_x,
        n_y: l.n_y,
        n_z1: l.n_z1,
        n_z2: l.n_z2,
    };
    let gamma1 = rows_mat(&f.gamma1, "gamma1")?;
    expect_dims(&gamma1, l.n_x, l.n_v, "gamma1")?;
    let gamma2 = rows_mat(&f.gamma2, "gamma2")?;
    expect_dims(&gamma2, l.n_y, l.n_e, "gamma2")?;
    let delta1 = rows_mat(&f.delta1, "delta1")?;
    expect_dims(&delta1, l.n_z1, l.n_e, "delta1")?;
    let delta2 = rows_mat(&f.delta2, "delta2")?;
    expect_dims(&delta2, l.n_z2, l.n_v, "delta2")?;
    let p = CoupledProblem {
        layout,
        op_a: op_from(&f.op_a, l.n_v, l.n_e, "op_a")?,
        op_b: op_from(&f.op_b, l.n_e, l.n_v, "op_b")?,
        j_fun: bif_from(&f.j_fun, l.n_z1, l.n_x, "j_fun")?,
        h_fun: bif_from(&f.h_fun, l.n_z2, l.n_y, "h_fun")?,
        psi: convex_from(&f.psi, l.n_v, "psi")?,
        theta: convex_from(&f.theta, l.n_e, "theta")?,
        set_c: set_from(&f.set_c, l.n_v, "set_c")?,
        set_d: set_from(&f.set_d, l.n_e, "set_d")?,
        gamma1: LinearMap::new(gamma1),
        gamma2: LinearMap::new(gamma2),
        delta1: LinearMap::new(delta1),
        delta2: LinearMap::new(delta2),
        rhs_h: vec_from(&f.rhs_h, l.n_v, "rhs_h")?,
        rhs_l: vec_from(&f.rhs_l, l.n_e, "rhs_l")?,
        anchor_u0: f
            .anchor_u0
            .as_ref()
            .map(|v| vec_from(v, l.n_v, "anchor_u0"))
            .transpose()?,
        anchor_w0: f
            .anchor_w0
            .as_ref()
            .map(|v| vec_from(v, l.n_e, "anchor_w0"))
            .transpose()?,
        profile_a: f.profile_a.as_ref().map(profile_from),
        profile_b: f.profile_b.as_ref().map(profile_from),
        kind: f.kind,
    };
    p.validate()?;
    Ok(p)
}

pub fn parse_problem(bytes: &[u8]) -> Result<CoupledProblem> {
    let file: ProblemFile = serde_json::from_slice(bytes)?;
    problem_from_file(&file)
}

/// Canonical text form: pretty JSON plus a trailing newline.
pub fn serialize_problem(p: &CoupledProblem) -> Result<String> {
    Ok(serde_json::to_string_pretty(&problem_to_file(p))? + "\n")
}

pub fn parse_problem_file(bytes: &[u8]) -> Result<ProblemFile> {
    Ok(serde_json::from_slice(bytes)?)
}

pub fn digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let mut out = String::with_capacity(7 + 64);
    out.push_str("sha256:");
    for b in h.finalize() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapValueDto {
    /// None encodes an unbounded (+infinite) gap.
    pub value: Option<f64>,
    pub lower_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
    pub certified: bool,
    pub unbounded: bool,
    /// Present only when the side is an operator equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equation_residual: Option<f64>,
    pub witness: Vec<f64>,
}

impl GapValueDto {
    pub fn of(g: &GapValue) -> Self {
        GapValueDto {
            value: g.value.is_finite().then_some(g.value),
            lower_bound: g.lower_bound,
            upper_bound: g.upper_bound,
            certified: g.certified,
            unbounded: g.unbounded,
            equation_residual: g.equation_residual,
            witness: g.witness.iter().cloned().collect(),
        }
    }

    pub fn value_or_inf(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapReportDto {
    pub primal1: GapValueDto,
    pub primal2: GapValueDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minty1: Option<GapValueDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minty2: Option<GapValueDto>,
}

impl GapReportDto {
    pub fn of(r: &GapReport) -> Self {
        GapReportDto {
            primal1: GapValueDto::of(&r.primal1),
            primal2: GapValueDto::of(&r.primal2),
            minty1: Some(GapValueDto::of(&r.minty1)),
            minty2: Some(GapValueDto::of(&r.minty2)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSummaryDto {
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub invariance_violations: usize,
}

impl TraceSummaryDto {
    pub fn of(outer_iters: usize, t: &SolveTrace) -> Self {
        TraceSummaryDto {
            outer_iters,
            inner_iters_total: t.inner_iters_total,
            invariance_violations: t.invariance_violations,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSummaryDto {
    pub all_consistent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_product: Option<f64>,
    pub pseudomonotone_witness_a: bool,
    pub pseudomonotone_witness_b: bool,
    pub coercivity_trend_a: bool,
    pub coercivity_trend_b: bool,
}

impl HypothesisSummaryDto {
    pub fn of(r: &HypothesisReport) -> Self {
        HypothesisSummaryDto {
            all_consistent: r.all_consistent,
            slope_product: r.slope_product,
            pseudomonotone_witness_a: r.op_a.pseudomonotone_witness.is_some(),
            pseudomonotone_witness_b: r.op_b.pseudomonotone_witness.is_some(),
            coercivity_trend_a: r.op_a.coercivity.trend_ok,
            coercivity_trend_b: r.op_b.coercivity.trend_ok,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub format_version: u32,
    pub tool_version: String,
    pub input_digest: String,
    /// "certified" or "nonconverged".
    pub status: String,
    pub seed: u64,
    pub tol: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub gaps: GapReportDto,
    pub trace: TraceSummaryDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesisSummaryDto>,
}

pub fn result_of_solution(
    sol: &Solution,
    input_digest: String,
    seed: u64,
    tol: f64,
    hypotheses: Option<HypothesisSummaryDto>,
) -> ResultFile {
    ResultFile {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_digest,
        status: "certified".into(),
        seed,
        tol,
        u: sol.u.iter().cloned().collect(),
        w: sol.w.iter().cloned().collect(),
        gaps: GapReportDto {
            primal1: GapValueDto::of(&sol.gap1),
            primal2: GapValueDto::of(&sol.gap2),
            minty1: None,
            minty2: None,
        },
        trace: TraceSummaryDto::of(sol.outer_iters, &sol.trace),
        hypotheses,
    }
}

pub fn serialize_result(r: &ResultFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(r)? + "\n")
}

pub fn parse_result(bytes: &[u8]) -> Result<ResultFile> {
    Ok(serde_json::from_slice(bytes)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleGridDto {
    pub per_axis: usize,
    pub nodes_u: usize,
    pub nodes_w: usize,
    pub h_max: f64,
    pub accept_tol: f64,
    pub lipschitz: f64,
    pub screened_out: usize,
    pub certified_checked: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleHitDto {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub gap1: f64,
    pub gap2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesDto {
    pub nonempty: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_bound: Option<bool>,
    pub clusters: usize,
    pub centroids_certified: bool,
    pub max_centroid_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    pub format_version: u32,
    pub tool_version: String,
    pub input_digest: String,
    pub seed: u64,
    pub grid: OracleGridDto,
    pub hits: Vec<OracleHitDto>,
    pub near_misses: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<ProbesDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_radius: Option<f64>,
}

pub fn oracle_file(
    out: &OracleOutcome,
    probes: Option<&SolutionSetProbes>,
    input_digest: String,
    seed: u64,
    solution_radius: Option<f64>,
) -> OracleFile {
    OracleFile {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_digest,
        seed,
        grid: OracleGridDto {
            per_axis: out.grid.per_axis,
            nodes_u: out.grid.nodes_u,
            nodes_w: out.grid.nodes_w,
            h_max: out.grid.h_max,
            accept_tol: out.grid.accept_tol,
            lipschitz: out.grid.lipschitz,
            screened_out: out.grid.screened_out,
            certified_checked: out.grid.certified_checked,
        },
        hits: out
            .hits
            .iter()
            .map(|h| OracleHitDto {
                u: h.u.iter().cloned().collect(),
                w: h.w.iter().cloned().collect(),
                gap1: h.gap1,
                gap2: h.gap2,
            })
            .collect(),
        near_misses: out.near_misses,
        probes: probes.map(|p| ProbesDto {
            nonempty: p.nonempty,
            within_bound: p.within_bound,
            clusters: p.clusters,
            centroids_certified: p.centroids_certified,
            max_centroid_gap: p.max_centroid_gap,
        }),
        solution_radius,
    }
}

pub fn serialize_oracle(f: &OracleFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(f)? + "\n")
}

pub fn parse_oracle(bytes: &[u8]) -> Result<OracleFile> {
    Ok(serde_json::from_slice(bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn round_trip_is_byte_stable() {
        for (name, p) in instances::library() {
            let once = serialize_problem(&p).unwrap();
            let back = parse_problem(once.as_bytes()).unwrap_or_else(|e| panic!("{name}: {e}"));
            let twice = serialize_problem(&back).unwrap();
            assert_eq!(once, twice, "{name}");
        }
    }

    #[test]
    fn parsed_problem_matches_the_original() {
        let p = instances::mixed_2d_hemi_psi();
        let back = parse_problem(serialize_problem(&p).unwrap().as_bytes()).unwrap();
        assert_eq!(back.rhs_h, p.rhs_h);
        assert_eq!(back.j_fun.pieces.len(), p.j_fun.pieces.len());
        assert_eq!(back.kind, p.kind);
        match (&back.op_a, &p.op_a) {
            (
                CoupledOperator::Affine { p: pa, k: ka, .. },
                CoupledOperator::Affine { p: pb, k: kb, .. },
            ) => {
                assert_eq!(pa, pb);
                assert_eq!(ka, kb);
            }
            _ => panic!("operator variant changed in transit"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut text = serialize_problem(&instances::decoupled_1d()).unwrap();
        text = text.replacen("\"format_version\"", "\"surprise\": 1,\n  \"format_version\"", 1);
        match parse_problem(text.as_bytes()) {
            Err(Error::Json(e)) => assert!(e.to_string().contains("surprise")),
            other => panic!("expected a json error, got {other:?}"),
        }
    }

    #[test]
    fn shape_errors_name_the_field() {
        let mut f = problem_to_file(&instances::decoupled_1d());
        f.gamma1 = vec![vec![1.0], vec![0.0]];
        match problem_from_file(&f) {
            Err(Error::Input(msg)) => assert!(msg.contains("gamma1"), "{msg}"),
            other => panic!("expected input error, got {other:?}"),
        }
    }

    #[test]
    fn digest_is_prefixed_hex() {
        let d = digest(b"abc");
        assert!(d.starts_with("sha256:"));
        assert_eq!(d.len(), 7 + 64);
        assert_eq!(
            d,
            "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn minimal_kind_v_file_parses() {
        let text = r#"{
  "format_version": 1,
  "layout": {"n_v": 1, "n_e": 1, "n_x": 1, "n_y": 1, "n_z1": 1, "n_z2": 1},
  "op_a": {"type": "affine", "P": [[1.0]], "K": [[0.5]], "a": [0.0]},
  "op_b": {"type": "affine", "P": [[1.0]], "K": [[0.5]], "a": [0.0]},
  "j_fun": {"type": "maxsmooth", "pieces": []},
  "h_fun": {"type": "maxsmooth", "pieces": []},
  "psi": {"terms": []},
  "theta": {"terms": []},
  "set_c": {"type": "whole"},
  "set_d": {"type": "whole"},
  "gamma1": [[1.0]],
  "gamma2": [[1.0]],
  "delta1": [[1.0]],
  "delta2": [[1.0]],
  "rhs_h": [0.6],
  "rhs_l": [0.6],
  "kind": "operator_equations"
}"#;
        let p = parse_problem(text.as_bytes()).unwrap();
        assert_eq!(p.kind, Some(SpecialCaseKind::OperatorEquations));
        assert!(p.j_fun.is_zero());
    }

    #[test]
    fn result_files_round_trip() {
        let r = ResultFile {
            format_version: FORMAT_VERSION,
            tool_version: "test".into(),
            input_digest: digest(b"x"),
            status: "certified".into(),
            seed: 7,
            tol: 1e-7,
            u: vec![1.0],
            w: vec![-0.5],
            gaps: GapReportDto {
                primal1: GapValueDto {
                    value: Some(0.0),
                    lower_bound: 0.0,
                    upper_bound: Some(0.0),
                    certified: true,
                    unbounded: false,
                    witness: vec![1.0],
                },
                primal2: GapValueDto {
                    value: None,
                    lower_bound: 1e3,
                    upper_bound: None,
                    certified: false,
                    unbounded: true,
                    witness: vec![0.0],
                },
                minty1: None,
                minty2: None,
            },
            trace: TraceSummaryDto {
                outer_iters: 3,
                inner_iters_total: 12,
                invariance_violations: 0,
            },
            hypotheses: None,
        };
        let text = serialize_result(&r).unwrap();
        let back = parse_result(text.as_bytes()).unwrap();
        assert_eq!(back.gaps.primal2.value, None);
        assert!(back.gaps.primal2.value_or_inf().is_infinite());
        assert_eq!(serialize_result(&back).unwrap(), text);
    }
}
