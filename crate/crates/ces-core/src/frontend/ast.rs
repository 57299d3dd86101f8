//! Abstract syntax tree for the mini-OpenMP input language.
//!
//! The language is a fixed C subset: `int`/`float`/`double` scalars and 1-D
//! arrays, arithmetic/comparison/logical expressions, `for`/`while`/
//! `do-while`/`if`, assignments, non-recursive function calls, and the
//! `#pragma omp` directives listed in [`Stmt`].

use std::fmt;

/// Byte range of a node in the original source, used only for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Span {
    pub lo: u32,
    pub hi: u32,
}

impl Span {
    pub fn new(lo: usize, hi: usize) -> Self {
        Span {
            lo: lo as u32,
            hi: hi as u32,
        }
    }
}

/// A node together with its source span.
///
/// Equality ignores the span so that structural AST comparison (the
/// parse/emit round-trip law) is unaffected by formatting.
#[derive(Debug, Clone)]
pub struct Sp<T> {
    pub node: T,
    pub span: Span,
}

impl<T> Sp<T> {
    pub fn new(node: T, span: Span) -> Self {
        Sp { node, span }
    }
}

impl<T: PartialEq> PartialEq for Sp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<T: PartialEq> Eq for Sp<T> {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    Int,
    Float,
    Double,
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarType::Int => write!(f, "int"),
            ScalarType::Float => write!(f, "float"),
            ScalarType::Double => write!(f, "double"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    BitAnd,
    BitOr,
    BitXor,
    Shl,
    Shr,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    IntLit(i64),
    FloatLit(f64),
    Var(String),
    /// `a[i]` — a 1-D array element access.
    Index {
        array: String,
        index: Box<Sp<Expr>>,
    },
    Unary {
        op: UnOp,
        operand: Box<Sp<Expr>>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Sp<Expr>>,
        rhs: Box<Sp<Expr>>,
    },
    /// Call in expression position. Calls that cannot be inlined are opaque
    /// to the cost model and flagged as unknown-cost.
    Call {
        name: String,
        args: Vec<Sp<Expr>>,
    },
    /// Parenthesized assignment, e.g. the loop driver
    /// `while ((i = doitr(tid)) != -1)`.
    Assign {
        target: Box<LValue>,
        value: Box<Sp<Expr>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(String),
    Index { array: String, index: Sp<Expr> },
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) => n,
            LValue::Index { array, .. } => array,
        }
    }
}

/// A variable declaration, either at global scope or as a statement.
#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub ty: ScalarType,
    pub name: String,
    /// `Some(len)` when this declares a 1-D array.
    pub array_len: Option<Sp<Expr>>,
    /// Scalar initializer.
    pub init: Option<Sp<Expr>>,
    /// Array initializer list (`= {a, b, c}`), globals only.
    pub init_list: Vec<Sp<Expr>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assign {
    pub target: LValue,
    pub value: Sp<Expr>,
}

/// Canonical counted loop `for (v = init; v < bound; v = v + step)`.
///
/// Every `for` loop in the dialect has this shape; `v++` and `v += s` are
/// accepted as sugar for the canonical step.
#[derive(Debug, Clone, PartialEq)]
pub struct ForLoop {
    pub var: String,
    pub init: Sp<Expr>,
    pub bound: Sp<Expr>,
    pub step: Sp<Expr>,
    pub body: Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Static,
    Dynamic,
    Guided,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Static => write!(f, "static"),
            ScheduleKind::Dynamic => write!(f, "dynamic"),
            ScheduleKind::Guided => write!(f, "guided"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub chunk: Option<Sp<Expr>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpFor {
    pub schedule: Option<Schedule>,
    pub nowait: bool,
    pub loop_: ForLoop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpSections {
    pub sections: Vec<Block>,
    pub nowait: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelRegion {
    pub num_threads: Option<Sp<Expr>>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Decl(Decl),
    Assign(Assign),
    If {
        cond: Sp<Expr>,
        then_body: Block,
        else_body: Option<Block>,
    },
    For(ForLoop),
    While {
        cond: Sp<Expr>,
        body: Block,
    },
    DoWhile {
        body: Block,
        cond: Sp<Expr>,
    },
    /// Statement-position call `name(args);`.
    Call {
        name: String,
        args: Vec<Sp<Expr>>,
    },
    Break,
    /// `#pragma omp barrier`
    Barrier,
    /// `#pragma omp parallel [num_threads(e)] { ... }`
    Parallel(ParallelRegion),
    /// `#pragma omp for [schedule(...)] [nowait]` + canonical loop
    OmpFor(OmpFor),
    /// `#pragma omp sections [nowait] { #pragma omp section {...} ... }`
    OmpSections(OmpSections),
    /// `#pragma omp single { ... }`
    OmpSingle {
        body: Block,
    },
    /// `#pragma omp atomic` + assignment
    AtomicWrite(Assign),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub stmts: Vec<Sp<Stmt>>,
}

impl Block {
    pub fn new(stmts: Vec<Sp<Stmt>>) -> Self {
        Block { stmts }
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub ty: ScalarType,
    pub name: String,
    pub is_array: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Block,
}

/// A parsed translation unit: global declarations plus function definitions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ast {
    pub globals: Vec<Sp<Decl>>,
    pub functions: Vec<FunctionDef>,
}

impl Ast {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }
}
