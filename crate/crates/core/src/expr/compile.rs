use nalgebra::DMatrix;

use super::ast::{Bindings, Expr, Var, VarKind};
use super::diff::differentiate;
use super::ExprError;

/// Ordered blocks of input variables. A map `g(xi, u)` with `q` states and
/// `m` inputs uses `[(X, q), (U, m)]`; its input vector is `(xi, u)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputLayout {
    blocks: Vec<(VarKind, usize)>,
}

impl InputLayout {
    pub fn new(blocks: Vec<(VarKind, usize)>) -> Self {
        InputLayout { blocks }
    }

    pub fn states(n: usize) -> Self {
        InputLayout::new(vec![(VarKind::X, n)])
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(_, n)| n).sum()
    }

    /// Variables in input order.
    pub fn vars(&self) -> Vec<Var> {
        self.blocks
            .iter()
            .flat_map(|&(kind, n)| (1..=n).map(move |i| Var::new(kind, i)))
            .collect()
    }

    fn bind<'a>(&self, input: &'a [f64]) -> Bindings<'a> {
        let mut env = Bindings::default();
        let mut start = 0;
        for &(kind, n) in &self.blocks {
            let slice = &input[start..start + n];
            match kind {
                VarKind::X => env.x = slice,
                VarKind::U => env.u = slice,
                VarKind::Z => env.z = slice,
                VarKind::Y => env.y = slice,
                VarKind::S => env.s = slice,
            }
            start += n;
        }
        env
    }
}

/// Output expressions plus their symbolic partial derivatives with respect
/// to every input variable.
#[derive(Debug, Clone)]
pub struct CompiledMap {
    layout: InputLayout,
    exprs: Vec<Expr>,
    // derivs[i][j] = d out_i / d in_j
    derivs: Vec<Vec<Expr>>,
}

/// Compiles `exprs` into an `n_out`-dimensional map over `layout`.
/// Parameter slots `s1..sk` are substituted from `params` first.
pub fn compile_map(
    exprs: Vec<Expr>,
    layout: InputLayout,
    n_out: usize,
    params: &[f64],
) -> Result<CompiledMap, ExprError> {
    if exprs.len() != n_out {
        return Err(ExprError::Dimension(format!(
            "expected {n_out} output expression(s), got {}",
            exprs.len()
        )));
    }
    let declared = layout.vars();
    let mut bound = Vec::with_capacity(exprs.len());
    for (i, e) in exprs.into_iter().enumerate() {
        let mut e = e;
        for (k, value) in params.iter().enumerate() {
            e = e.substitute(Var::new(VarKind::S, k + 1), &Expr::Const(*value));
        }
        if let Some(v) = e.free_vars().into_iter().find(|v| !declared.contains(v)) {
            return Err(ExprError::Undeclared { output: i, var: v });
        }
        bound.push(e);
    }
    let derivs = bound
        .iter()
        .map(|e| declared.iter().map(|&v| differentiate(e, v)).collect())
        .collect();
    Ok(CompiledMap {
        layout,
        exprs: bound,
        derivs,
    })
}

impl CompiledMap {
    pub fn n_in(&self) -> usize {
        self.layout.dim()
    }

    pub fn n_out(&self) -> usize {
        self.exprs.len()
    }

    pub fn layout(&self) -> &InputLayout {
        &self.layout
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn derivative(&self, output: usize, input: usize) -> &Expr {
        &self.derivs[output][input]
    }

    fn check_len(&self, input: &[f64]) -> Result<(), ExprError> {
        if input.len() != self.n_in() {
            return Err(ExprError::Dimension(format!(
                "input has length {}, map expects {}",
                input.len(),
                self.n_in()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, input: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.check_len(input)?;
        let env = self.layout.bind(input);
        self.exprs.iter().map(|e| e.evaluate(&env)).collect()
    }

    pub fn jacobian(&self, input: &[f64]) -> Result<DMatrix<f64>, ExprError> {
        self.check_len(input)?;
        let env = self.layout.bind(input);
        let mut jac = DMatrix::zeros(self.n_out(), self.n_in());
        for (i, row) in self.derivs.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                jac[(i, j)] = d.evaluate(&env)?;
            }
        }
        Ok(jac)
    }
}
