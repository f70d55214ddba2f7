use std::collections::BTreeSet;
use std::fmt;

use super::ExprError;

/// Variable families an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// State coordinates `x1..xn`.
    X,
    /// Inputs `u1..um`.
    U,
    /// Integrator states `z1..zp`.
    Z,
    /// Regulated outputs `y1..yp`, used by integrator maps `k(xi, y)`.
    Y,
    /// Scalar parameter slots `s1..sk` (bare `s` is `s1`).
    S,
}

impl VarKind {
    fn prefix(self) -> char {
        match self {
            VarKind::X => 'x',
            VarKind::U => 'u',
            VarKind::Z => 'z',
            VarKind::Y => 'y',
            VarKind::S => 's',
        }
    }
}

/// A variable reference, 1-based as written in source (`x1` is `index == 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

impl Var {
    pub fn new(kind: VarKind, index: usize) -> Self {
        Var { kind, index }
    }

    pub fn x(index: usize) -> Self {
        Var::new(VarKind::X, index)
    }

    /// Parses identifiers like `x3` or `s`.
    pub fn from_ident(name: &str) -> Option<Var> {
        let mut chars = name.chars();
        let kind = match chars.next()? {
            'x' => VarKind::X,
            'u' => VarKind::U,
            'z' => VarKind::Z,
            'y' => VarKind::Y,
            's' => VarKind::S,
            _ => return None,
        };
        let rest = chars.as_str();
        if rest.is_empty() {
            return (kind == VarKind::S).then_some(Var::new(kind, 1));
        }
        if !rest.bytes().all(|b| b.is_ascii_digit()) || rest.starts_with('0') {
            return None;
        }
        rest.parse().ok().map(|index| Var::new(kind, index))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Built-in functions. `Branch` never comes out of the parser: it is the
/// sign-selection node `branch(on, neg, zero, pos)` that derivative
/// expressions of `abs`, `sat`, `min` and `max` are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
    Abs,
    Sat,
    Min,
    Max,
    Branch,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sat" => Func::Sat,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sat => "sat",
            Func::Min => "min",
            Func::Max => "max",
            Func::Branch => "branch",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            Func::Branch => 4,
            _ => 1,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Values for the variable families, indexed from zero (`x1` is `x[0]`).
#[derive(Debug, Default, Clone, Copy)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    pub u: &'a [f64],
    pub z: &'a [f64],
    pub y: &'a [f64],
    pub s: &'a [f64],
}

impl<'a> Bindings<'a> {
    pub fn states(x: &'a [f64]) -> Self {
        Bindings {
            x,
            ..Default::default()
        }
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        let slot = match var.kind {
            VarKind::X => self.x,
            VarKind::U => self.u,
            VarKind::Z => self.z,
            VarKind::Y => self.y,
            VarKind::S => self.s,
        };
        var.index.checked_sub(1).and_then(|i| slot.get(i).copied())
    }
}

pub fn sat(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn is_const(&self, v: f64) -> bool {
        matches!(self, Expr::Const(c) if *c == v)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Free variables in sorted order.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
            Expr::Call(_, args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    /// Replaces every occurrence of `var` by `value`.
    pub fn substitute(&self, var: Var, value: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => value.clone(),
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(var, value))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(var, value)),
                Box::new(b.substitute(var, value)),
            ),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(var, value)).collect()),
        }
    }

    /// Evaluates in IEEE double precision. Domain violations are errors
    /// rather than NaN.
    pub fn evaluate(&self, env: &Bindings<'_>) -> Result<f64, ExprError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(v) => env.get(*v).ok_or(ExprError::Unbound(*v)),
            Expr::Neg(a) => Ok(-a.evaluate(env)?),
            Expr::Binary(op, a, b) => {
                let l = a.evaluate(env)?;
                let r = b.evaluate(env)?;
                match op {
                    BinOp::Add => Ok(l + r),
                    BinOp::Sub => Ok(l - r),
                    BinOp::Mul => Ok(l * r),
                    BinOp::Div => {
                        if r == 0.0 {
                            Err(ExprError::Domain {
                                func: "/",
                                arg: l,
                                detail: "division by zero",
                            })
                        } else {
                            Ok(l / r)
                        }
                    }
                    BinOp::Pow => power(l, r),
                }
            }
            Expr::Call(func, args) => {
                if *func == Func::Branch {
                    let on = args[0].evaluate(env)?;
                    let pick = if on < 0.0 {
                        &args[1]
                    } else if on == 0.0 {
                        &args[2]
                    } else {
                        &args[3]
                    };
                    return pick.evaluate(env);
                }
                let a = args[0].evaluate(env)?;
                Ok(match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Tanh => a.tanh(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(ExprError::Domain {
                                func: "sqrt",
                                arg: a,
                                detail: "negative argument",
                            });
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Sat => sat(a),
                    Func::Min => a.min(args[1].evaluate(env)?),
                    Func::Max => a.max(args[1].evaluate(env)?),
                    Func::Branch => unreachable!(),
                })
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if *c < 0.0 => 5,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
            Expr::Binary(BinOp::Pow, ..) => 4,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        }
    }
}

fn power(base: f64, exp: f64) -> Result<f64, ExprError> {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        if base == 0.0 && exp < 0.0 {
            return Err(ExprError::Domain {
                func: "^",
                arg: base,
                detail: "zero to a negative power",
            });
        }
        return Ok(base.powi(exp as i32));
    }
    if base < 0.0 {
        return Err(ExprError::Domain {
            func: "^",
            arg: base,
            detail: "negative base with fractional exponent",
        });
    }
    if base == 0.0 && exp < 0.0 {
        return Err(ExprError::Domain {
            func: "^",
            arg: base,
            detail: "zero to a negative power",
        });
    }
    Ok(base.powf(exp))
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

/// Canonical printed form. Re-parsing it yields an expression with identical
/// evaluation (negative constants are parenthesized since literals are
/// unsigned).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Expr::Binary(op, a, b) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    write_child(f, a, 5)?;
                    write!(f, "^")?;
                    write_child(f, b, 4)
                } else {
                    write_child(f, a, prec)?;
                    write!(f, " {sym} ")?;
                    write_child(f, b, prec + 1)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

// Simplifying constructors used by the differentiator. Constants are folded
// only when the result stays finite.

fn fold(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Const(v))
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => fold(x + y).unwrap_or_else(|| bin(BinOp::Add, a, b)),
        _ if a.is_const(0.0) => b,
        _ if b.is_const(0.0) => a,
        (_, Expr::Neg(inner)) => sub(a, (**inner).clone()),
        _ => bin(BinOp::Add, a, b),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => fold(x - y).unwrap_or_else(|| bin(BinOp::Sub, a, b)),
        _ if b.is_const(0.0) => a,
        _ if a.is_const(0.0) => neg(b),
        (_, Expr::Neg(inner)) => add(a, (**inner).clone()),
        _ => bin(BinOp::Sub, a, b),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => fold(x * y).unwrap_or_else(|| bin(BinOp::Mul, a, b)),
        _ if a.is_const(0.0) || b.is_const(0.0) => Expr::Const(0.0),
        _ if a.is_const(1.0) => b,
        _ if b.is_const(1.0) => a,
        _ if a.is_const(-1.0) => neg(b),
        _ if b.is_const(-1.0) => neg(a),
        // keep constants on the left: 2*x rather than x*2
        (_, Expr::Const(_)) => bin(BinOp::Mul, b, a),
        (Expr::Neg(x), _) => neg(mul((**x).clone(), b)),
        (_, Expr::Neg(y)) => neg(mul(a, (**y).clone())),
        _ => bin(BinOp::Mul, a, b),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => fold(x / y).unwrap_or_else(|| bin(BinOp::Div, a, b)),
        _ if a.is_const(0.0) => Expr::Const(0.0),
        _ if b.is_const(1.0) => a,
        _ => bin(BinOp::Div, a, b),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => match power(*x, *y) {
            Ok(v) if v.is_finite() => Expr::Const(v),
            _ => bin(BinOp::Pow, a, b),
        },
        _ if b.is_const(1.0) => a,
        _ if b.is_const(0.0) => Expr::Const(1.0),
        _ => bin(BinOp::Pow, a, b),
    }
}

pub fn call(func: Func, args: Vec<Expr>) -> Expr {
    if func != Func::Branch {
        let consts: Option<Vec<f64>> = args.iter().map(Expr::as_const).collect();
        if let Some(vals) = consts {
            let env = Bindings::default();
            let e = Expr::Call(func, vals.iter().map(|v| Expr::Const(*v)).collect());
            if let Ok(v) = e.evaluate(&env) {
                if v.is_finite() {
                    return Expr::Const(v);
                }
            }
        }
    }
    Expr::Call(func, args)
}

/// `branch(on, neg, zero, pos)`, collapsed when all three arms agree or the
/// selector is constant.
pub fn branch(on: Expr, when_neg: Expr, when_zero: Expr, when_pos: Expr) -> Expr {
    if when_neg == when_zero && when_zero == when_pos {
        return when_pos;
    }
    if let Some(c) = on.as_const() {
        return if c < 0.0 {
            when_neg
        } else if c == 0.0 {
            when_zero
        } else {
            when_pos
        };
    }
    Expr::Call(Func::Branch, vec![on, when_neg, when_zero, when_pos])
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Box::new(a), Box::new(b))
}
