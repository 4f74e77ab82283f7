//! Scalar expression trees.
//!
//! Every formula in the crate (vector field components, mass matrices,
//! constraint rows, Lyapunov candidates, adversary templates) is a
//! [`ScalarExpr`]. Trees are immutable and share subtrees through `Arc`, so
//! differentiation is cheap and expressions can be evaluated from many
//! threads at once.
//!
//! Two evaluation paths exist: [`ScalarExpr::eval`] resolves variables through
//! a [`VarAssignment`] map, while [`ScalarExpr::compile`] resolves them once
//! against an ordered list of names and yields a [`CompiledExpr`] that
//! evaluates from a slice. Hot loops (integrators, root searches, winding
//! numbers) use the compiled form.

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse_expr, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Variable bindings used by [`ScalarExpr::eval`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarAssignment {
    bindings: BTreeMap<String, f64>,
}

impl VarAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.bindings.insert(name.to_owned(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.bindings.insert(name.to_owned(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.bindings.get(name).copied()
    }
}

impl<S: AsRef<str>> FromIterator<(S, f64)> for VarAssignment {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Self {
            bindings: iter
                .into_iter()
                .map(|(k, v)| (k.as_ref().to_owned(), v))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarExpr {
    Const(f64),
    Var(Arc<str>),
    Add(Arc<ScalarExpr>, Arc<ScalarExpr>),
    Sub(Arc<ScalarExpr>, Arc<ScalarExpr>),
    Mul(Arc<ScalarExpr>, Arc<ScalarExpr>),
    Div(Arc<ScalarExpr>, Arc<ScalarExpr>),
    Pow(Arc<ScalarExpr>, i32),
    Neg(Arc<ScalarExpr>),
    Sin(Arc<ScalarExpr>),
    Cos(Arc<ScalarExpr>),
    Sqrt(Arc<ScalarExpr>),
}

use ScalarExpr::*;

// Constructors fold constants and drop additive zeros / multiplicative ones.
// Nothing else is rewritten.
impl ScalarExpr {
    pub fn constant(c: f64) -> Self {
        Const(c)
    }

    pub fn zero() -> Self {
        Const(0.0)
    }

    pub fn one() -> Self {
        Const(1.0)
    }

    pub fn var(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn add(a: Self, b: Self) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Add(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn sub(a: Self, b: Self) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Const(x - y),
            (Some(x), _) if x == 0.0 => Self::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Sub(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn mul(a: Self, b: Self) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Const(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            _ => Mul(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn div(a: Self, b: Self) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Const(x / y),
            (_, Some(y)) if y == 1.0 => a,
            _ => Div(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn pow(a: Self, n: i32) -> Self {
        match (a.as_const(), n) {
            (_, 1) => a,
            (Some(x), _) if x != 0.0 || n > 0 => Const(x.powi(n)),
            _ => Pow(Arc::new(a), n),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Self) -> Self {
        match a {
            Const(x) => Const(-x),
            Neg(inner) => (*inner).clone(),
            _ => Neg(Arc::new(a)),
        }
    }

    pub fn sin(a: Self) -> Self {
        match a.as_const() {
            Some(x) => Const(x.sin()),
            None => Sin(Arc::new(a)),
        }
    }

    pub fn cos(a: Self) -> Self {
        match a.as_const() {
            Some(x) => Const(x.cos()),
            None => Cos(Arc::new(a)),
        }
    }

    pub fn sqrt(a: Self) -> Self {
        match a.as_const() {
            Some(x) if x >= 0.0 => Const(x.sqrt()),
            _ => Sqrt(Arc::new(a)),
        }
    }

    /// Free variables, sorted.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Const(_) => {}
            Var(name) => {
                out.insert(name.to_string());
            }
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Pow(a, _) | Neg(a) | Sin(a) | Cos(a) | Sqrt(a) => a.collect_vars(out),
        }
    }

    pub fn eval(&self, a: &VarAssignment) -> Result<f64, EvalError> {
        self.eval_with(&mut |name| a.get(name).ok_or_else(|| EvalError::Unbound(name.to_owned())))
    }

    fn eval_with<F>(&self, lookup: &mut F) -> Result<f64, EvalError>
    where
        F: FnMut(&str) -> Result<f64, EvalError>,
    {
        let v = match self {
            Const(c) => *c,
            Var(name) => lookup(name)?,
            Add(a, b) => a.eval_with(lookup)? + b.eval_with(lookup)?,
            Sub(a, b) => a.eval_with(lookup)? - b.eval_with(lookup)?,
            Mul(a, b) => a.eval_with(lookup)? * b.eval_with(lookup)?,
            Div(a, b) => checked_div(a.eval_with(lookup)?, b.eval_with(lookup)?)?,
            Pow(a, n) => checked_powi(a.eval_with(lookup)?, *n)?,
            Neg(a) => -a.eval_with(lookup)?,
            Sin(a) => a.eval_with(lookup)?.sin(),
            Cos(a) => a.eval_with(lookup)?.cos(),
            Sqrt(a) => checked_sqrt(a.eval_with(lookup)?)?,
        };
        finite(v)
    }

    /// Exact partial derivative with respect to `v`.
    pub fn differentiate(&self, v: &str) -> ScalarExpr {
        match self {
            Const(_) => Self::zero(),
            Var(name) => {
                if &**name == v {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Add(a, b) => Self::add(a.differentiate(v), b.differentiate(v)),
            Sub(a, b) => Self::sub(a.differentiate(v), b.differentiate(v)),
            Mul(a, b) => Self::add(
                Self::mul(a.differentiate(v), (**b).clone()),
                Self::mul((**a).clone(), b.differentiate(v)),
            ),
            Div(a, b) => {
                let da = a.differentiate(v);
                let db = b.differentiate(v);
                if db.is_zero() {
                    Self::div(da, (**b).clone())
                } else {
                    Self::div(
                        Self::sub(
                            Self::mul(da, (**b).clone()),
                            Self::mul((**a).clone(), db),
                        ),
                        Self::pow((**b).clone(), 2),
                    )
                }
            }
            Pow(a, n) => {
                let da = a.differentiate(v);
                if *n == 0 || da.is_zero() {
                    return Self::zero();
                }
                Self::mul(
                    Self::mul(Self::constant(*n as f64), Self::pow((**a).clone(), n - 1)),
                    da,
                )
            }
            Neg(a) => Self::neg(a.differentiate(v)),
            Sin(a) => Self::mul(Self::cos((**a).clone()), a.differentiate(v)),
            Cos(a) => Self::neg(Self::mul(Self::sin((**a).clone()), a.differentiate(v))),
            Sqrt(a) => {
                let da = a.differentiate(v);
                if da.is_zero() {
                    return Self::zero();
                }
                Self::div(da, Self::mul(Self::constant(2.0), self.clone()))
            }
        }
    }

    /// Replace variable `name` with `value` everywhere.
    pub fn substitute(&self, name: &str, value: &ScalarExpr) -> ScalarExpr {
        match self {
            Const(_) => self.clone(),
            Var(n) => {
                if &**n == name {
                    value.clone()
                } else {
                    self.clone()
                }
            }
            Add(a, b) => Self::add(a.substitute(name, value), b.substitute(name, value)),
            Sub(a, b) => Self::sub(a.substitute(name, value), b.substitute(name, value)),
            Mul(a, b) => Self::mul(a.substitute(name, value), b.substitute(name, value)),
            Div(a, b) => Self::div(a.substitute(name, value), b.substitute(name, value)),
            Pow(a, n) => Self::pow(a.substitute(name, value), *n),
            Neg(a) => Self::neg(a.substitute(name, value)),
            Sin(a) => Self::sin(a.substitute(name, value)),
            Cos(a) => Self::cos(a.substitute(name, value)),
            Sqrt(a) => Self::sqrt(a.substitute(name, value)),
        }
    }

    /// Resolve variables against `names` (slot `i` holds `names[i]`).
    pub fn compile<S: AsRef<str>>(&self, names: &[S]) -> Result<CompiledExpr, EvalError> {
        let node = self.lower(names)?;
        Ok(CompiledExpr {
            root: Arc::new(node),
            arity: names.len(),
        })
    }

    fn lower<S: AsRef<str>>(&self, names: &[S]) -> Result<Node, EvalError> {
        let l = |e: &ScalarExpr| e.lower(names).map(Box::new);
        Ok(match self {
            Const(c) => Node::Const(*c),
            Var(name) => Node::Slot(
                names
                    .iter()
                    .position(|n| n.as_ref() == &**name)
                    .ok_or_else(|| EvalError::Unbound(name.to_string()))?,
            ),
            Add(a, b) => Node::Add(l(a)?, l(b)?),
            Sub(a, b) => Node::Sub(l(a)?, l(b)?),
            Mul(a, b) => Node::Mul(l(a)?, l(b)?),
            Div(a, b) => Node::Div(l(a)?, l(b)?),
            Pow(a, n) => Node::Pow(l(a)?, *n),
            Neg(a) => Node::Neg(l(a)?),
            Sin(a) => Node::Sin(l(a)?),
            Cos(a) => Node::Cos(l(a)?),
            Sqrt(a) => Node::Sqrt(l(a)?),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Add(..) | Sub(..) => 1,
            Mul(..) | Div(..) => 2,
            Neg(..) => 3,
            Pow(..) => 4,
            Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain(format!("non-finite intermediate value {v}")))
    }
}

fn checked_div(a: f64, b: f64) -> Result<f64, EvalError> {
    if b == 0.0 {
        return Err(EvalError::Domain("division by zero".into()));
    }
    finite(a / b)
}

fn checked_sqrt(a: f64) -> Result<f64, EvalError> {
    if a < 0.0 {
        return Err(EvalError::Domain(format!("sqrt of negative value {a}")));
    }
    Ok(a.sqrt())
}

fn checked_powi(a: f64, n: i32) -> Result<f64, EvalError> {
    if a == 0.0 && n < 0 {
        return Err(EvalError::Domain("zero raised to a negative power".into()));
    }
    finite(a.powi(n))
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Parenthesize a child whenever its precedence is not strictly higher
        // on the right of a non-commutative operator; this keeps the printed
        // form parseable back to an equivalent tree.
        fn child(
            f: &mut fmt::Formatter<'_>,
            e: &ScalarExpr,
            min_prec: u8,
        ) -> fmt::Result {
            if e.precedence() < min_prec {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{})", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Var(name) => write!(f, "{name}"),
            Add(a, b) => {
                child(f, a, 1)?;
                write!(f, " + ")?;
                child(f, b, 2)
            }
            Sub(a, b) => {
                child(f, a, 1)?;
                write!(f, " - ")?;
                child(f, b, 2)
            }
            Mul(a, b) => {
                child(f, a, 2)?;
                write!(f, "*")?;
                child(f, b, 3)
            }
            Div(a, b) => {
                child(f, a, 2)?;
                write!(f, "/")?;
                child(f, b, 3)
            }
            Pow(a, n) => {
                child(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Neg(a) => {
                write!(f, "-")?;
                child(f, a, 4)
            }
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
            Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

impl std::str::FromStr for ScalarExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

#[derive(Debug)]
enum Node {
    Const(f64),
    Slot(usize),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Neg(Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
    Sqrt(Box<Node>),
}

impl Node {
    fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Node::Const(c) => return Ok(*c),
            Node::Slot(i) => return Ok(x[*i]),
            Node::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Node::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Node::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Node::Div(a, b) => return checked_div(a.eval(x)?, b.eval(x)?),
            Node::Pow(a, n) => return checked_powi(a.eval(x)?, *n),
            Node::Neg(a) => -a.eval(x)?,
            Node::Sin(a) => a.eval(x)?.sin(),
            Node::Cos(a) => a.eval(x)?.cos(),
            Node::Sqrt(a) => return checked_sqrt(a.eval(x)?),
        };
        finite(v)
    }
}

/// An expression with variables resolved to slice positions.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    root: Arc<Node>,
    arity: usize,
}

impl CompiledExpr {
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Evaluate at `x`; panics if `x.len() < self.arity()`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        assert!(x.len() >= self.arity, "argument slice too short");
        self.root.eval(x)
    }
}

/// A list of expressions compiled against one shared variable ordering,
/// together with their symbolic Jacobian.
#[derive(Debug, Clone)]
pub struct CompiledMap {
    components: Vec<CompiledExpr>,
    jacobian: Vec<Vec<CompiledExpr>>,
}

impl CompiledMap {
    pub fn new<S: AsRef<str>>(exprs: &[ScalarExpr], names: &[S]) -> Result<Self, EvalError> {
        let components = exprs
            .iter()
            .map(|e| e.compile(names))
            .collect::<Result<Vec<_>, _>>()?;
        let jacobian = exprs
            .iter()
            .map(|e| {
                names
                    .iter()
                    .map(|n| e.differentiate(n.as_ref()).compile(names))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            components,
            jacobian,
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x)?;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Row-major Jacobian, `len() x x.len()`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        self.jacobian
            .iter()
            .map(|row| row.iter().map(|c| c.eval(x)).collect())
            .collect()
    }
}
