use std::collections::BTreeMap;
use std::fmt;

/// Index of a node in an [`Ast`] arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Source anchor of a node (1-based line and column of its first token).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

/// Basic scalar types; arrays are one-dimensional over these.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basic {
    Int,
    Float,
    Bool,
}

/// MiniLang types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Int,
    Float,
    Bool,
    Array(Basic),
    Record(String),
}

impl Ty {
    pub fn basic(b: Basic) -> Ty {
        match b {
            Basic::Int => Ty::Int,
            Basic::Float => Ty::Float,
            Basic::Bool => Ty::Bool,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Ty::Int | Ty::Float)
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int => write!(f, "int"),
            Ty::Float => write!(f, "float"),
            Ty::Bool => write!(f, "bool"),
            Ty::Array(Basic::Int) => write!(f, "int[]"),
            Ty::Array(Basic::Float) => write!(f, "float[]"),
            Ty::Array(Basic::Bool) => write!(f, "bool[]"),
            Ty::Record(name) => write!(f, "{name}"),
        }
    }
}

/// Closed set of AST node kinds; [`AstKind::label`] gives the node label used
/// in block ASTs and the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AstKind {
    Program,
    RecordDecl,
    FieldDecl,
    FuncDecl,
    Param,
    Block,
    /// `T x;` or `T x = init;`
    VarDecl,
    /// `int a[n];` style sized array declaration.
    SizedArrayDecl,
    Assign,
    If,
    While,
    For,
    Switch,
    CaseArm,
    DefaultArm,
    Return,
    ExprStmt,
    BinOp,
    UnOp,
    Invoke,
    ArrayRef,
    FieldRef,
    Local,
    IntConst,
    FloatConst,
    BoolConst,
    Cast,
}

impl AstKind {
    /// Label under which this kind appears in block ASTs. Declarations and
    /// assignments share one label: at the instruction level both are
    /// definition statements.
    pub fn label(self) -> &'static str {
        match self {
            AstKind::Program => "Program",
            AstKind::RecordDecl => "Record",
            AstKind::FieldDecl => "Field",
            AstKind::FuncDecl => "FuncDecl",
            AstKind::Param => "Param",
            AstKind::Block => "Block",
            AstKind::VarDecl | AstKind::SizedArrayDecl | AstKind::Assign => "DefStmt",
            AstKind::If => "If",
            AstKind::While => "While",
            AstKind::For => "For",
            AstKind::Switch => "Switch",
            AstKind::CaseArm => "Case",
            AstKind::DefaultArm => "Default",
            AstKind::Return => "ReturnOp",
            AstKind::ExprStmt => "ExprStmt",
            AstKind::BinOp => "BOp",
            AstKind::UnOp => "UOp",
            AstKind::Invoke => "Invoke",
            AstKind::ArrayRef => "ArrayRef",
            AstKind::FieldRef => "FieldRef",
            AstKind::Local => "Local",
            AstKind::IntConst | AstKind::FloatConst | AstKind::BoolConst => "Const",
            AstKind::Cast => "Cast",
        }
    }

    pub fn is_expr(self) -> bool {
        matches!(
            self,
            AstKind::BinOp
                | AstKind::UnOp
                | AstKind::Invoke
                | AstKind::ArrayRef
                | AstKind::FieldRef
                | AstKind::Local
                | AstKind::IntConst
                | AstKind::FloatConst
                | AstKind::BoolConst
                | AstKind::Cast
        )
    }
}

/// One AST node. `text` holds the identifier, operator, or literal spelling
/// where the kind has one; `ty` is the declared type on declarations and the
/// inferred type on expressions (filled during resolution).
#[derive(Debug, Clone, PartialEq)]
pub struct AstNode {
    pub kind: AstKind,
    pub children: Vec<NodeId>,
    pub text: Option<String>,
    pub ty: Option<Ty>,
    pub span: Span,
    pub parent: Option<NodeId>,
}

/// Arena of AST nodes. Every node except the root has exactly one parent;
/// [`Ast::adopt`] enforces this when trees are stitched together.
#[derive(Debug, Clone, Default)]
pub struct Ast {
    nodes: Vec<AstNode>,
}

impl Ast {
    pub fn new() -> Ast {
        Ast::default()
    }

    pub fn alloc(&mut self, kind: AstKind, span: Span) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(AstNode { kind, children: Vec::new(), text: None, ty: None, span, parent: None });
        id
    }

    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id.0 as usize]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut AstNode {
        &mut self.nodes[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Attaches `child` under `parent`. Panics if the child already has a
    /// parent: each node is adopted exactly once.
    pub fn adopt(&mut self, parent: NodeId, child: NodeId) {
        assert!(
            self.node(child).parent.is_none(),
            "AST node {child:?} adopted twice"
        );
        self.node_mut(child).parent = Some(parent);
        self.node_mut(parent).children.push(child);
    }

    pub fn set_text(&mut self, id: NodeId, text: impl Into<String>) {
        self.node_mut(id).text = Some(text.into());
    }

    pub fn set_ty(&mut self, id: NodeId, ty: Ty) {
        self.node_mut(id).ty = Some(ty);
    }

    pub fn kind(&self, id: NodeId) -> AstKind {
        self.node(id).kind
    }

    pub fn text(&self, id: NodeId) -> &str {
        self.node(id).text.as_deref().unwrap_or("")
    }

    pub fn ty(&self, id: NodeId) -> Option<&Ty> {
        self.node(id).ty.as_ref()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.node(id).children
    }

    /// Structural equality of two subtrees: kind, text, type, and children,
    /// ignoring spans and arena indices.
    pub fn subtree_eq(&self, id: NodeId, other: &Ast, other_id: NodeId) -> bool {
        let a = self.node(id);
        let b = other.node(other_id);
        a.kind == b.kind
            && a.text == b.text
            && a.ty == b.ty
            && a.children.len() == b.children.len()
            && a.children
                .iter()
                .zip(&b.children)
                .all(|(&ca, &cb)| self.subtree_eq(ca, other, cb))
    }

    /// All node ids of the subtree rooted at `id`, preorder.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            for &c in self.children(n).iter().rev() {
                stack.push(c);
            }
        }
        out
    }
}

/// Record type: field names with their types, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordInfo {
    pub node: NodeId,
    pub fields: Vec<(String, Ty)>,
}

impl RecordInfo {
    pub fn field_ty(&self, name: &str) -> Option<&Ty> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Function signature and the parameter names in order.
#[derive(Debug, Clone, PartialEq)]
pub struct FuncSig {
    pub node: NodeId,
    pub params: Vec<(String, Ty)>,
    pub ret: Ty,
}

/// A fully parsed, resolved, and type-annotated compilation unit.
#[derive(Debug, Clone)]
pub struct ProgramAst {
    pub ast: Ast,
    pub root: NodeId,
    pub records: BTreeMap<String, RecordInfo>,
    pub functions: BTreeMap<String, FuncSig>,
    /// Function names in source order (the maps above are sorted by name).
    pub function_order: Vec<String>,
}

impl ProgramAst {
    pub fn structurally_eq(&self, other: &ProgramAst) -> bool {
        self.ast.subtree_eq(self.root, &other.ast, other.root)
    }
}
