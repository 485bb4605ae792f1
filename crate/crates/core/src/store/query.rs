//! Read-only query dialect over the store's logical tables.
//!
//! ```text
//! query    := SELECT [DISTINCT] ("*" | column ("," column)*)
//!             FROM table [[AS] alias]
//!             (JOIN table [[AS] alias] ON colref "=" colref)*
//!             [WHERE expr]
//!             [ORDER BY colref [ASC|DESC] ("," colref [ASC|DESC])*]
//!             [LIMIT integer]
//! column   := colref [AS name]
//! colref   := name | alias "." name
//! expr     := term (OR term)*          term := factor (AND factor)*
//! factor   := NOT factor | "(" expr ")" | operand cmp operand
//!           | operand [NOT] LIKE 'pattern' | operand [NOT] IN "(" literal, ... ")"
//!           | operand IS [NOT] NULL
//! cmp      := = | != | <> | < | <= | > | >=
//! ```
//!
//! Keywords are case-insensitive. Strings use single or double quotes, with
//! the quote doubled to escape it. `LIKE` supports `%` and `_`. Comparisons
//! between a number and a text value, or with NULL, are false. Without
//! `ORDER BY`, rows come out in the source tables' canonical order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use super::lexer::{tokenize, Cursor, Token, TokenKind};
use super::model::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("query error at {position}: {message}")]
pub struct QueryError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

/// Named tables a query can read.
pub type Surface = BTreeMap<String, Table>;

#[derive(Debug, Clone)]
struct ColRef {
    table: Option<String>,
    column: String,
    pos: usize,
}

#[derive(Debug, Clone)]
struct TableRef {
    name: String,
    alias: String,
    pos: usize,
}

#[derive(Debug, Clone)]
struct Join {
    table: TableRef,
    left: ColRef,
    right: ColRef,
}

#[derive(Debug, Clone)]
enum Operand {
    Col(ColRef),
    Lit(Value),
}

#[derive(Debug, Clone, Copy)]
enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone)]
enum Expr {
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Cmp(Operand, CmpOp, Operand),
    Like(Operand, String),
    In(Operand, Vec<Value>),
    IsNull(Operand),
}

#[derive(Debug, Clone)]
struct Query {
    distinct: bool,
    columns: Option<Vec<(ColRef, Option<String>)>>,
    from: TableRef,
    joins: Vec<Join>,
    filter: Option<Expr>,
    order: Vec<(ColRef, bool)>,
    limit: Option<usize>,
}

const RESERVED: [&str; 16] = [
    "select", "distinct", "from", "join", "on", "where", "order", "by", "limit", "and", "or",
    "not", "like", "in", "is", "as",
];

fn error_at(pos: usize, message: impl Into<String>) -> QueryError {
    QueryError {
        position: pos,
        message: message.into(),
    }
}

struct Parser {
    cur: Cursor,
}

impl Parser {
    fn expect_keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.cur.eat_keyword(kw) {
            Ok(())
        } else {
            Err(error_at(self.cur.pos(), format!("expected {}", kw.to_uppercase())))
        }
    }

    fn ident(&mut self) -> Result<(String, usize), QueryError> {
        let pos = self.cur.pos();
        match self.cur.peek().map(|t| &t.kind) {
            Some(TokenKind::Ident(s)) if !RESERVED.contains(&s.to_ascii_lowercase().as_str()) => {
                let s = s.clone();
                self.cur.next();
                Ok((s, pos))
            }
            _ => Err(error_at(pos, "expected an identifier")),
        }
    }

    fn colref(&mut self) -> Result<ColRef, QueryError> {
        let (first, pos) = self.ident()?;
        if self.cur.eat_symbol(".") {
            let (column, _) = self.ident()?;
            Ok(ColRef {
                table: Some(first),
                column,
                pos,
            })
        } else {
            Ok(ColRef {
                table: None,
                column: first,
                pos,
            })
        }
    }

    fn table_ref(&mut self) -> Result<TableRef, QueryError> {
        let (name, pos) = self.ident()?;
        let alias = if self.cur.eat_keyword("as") {
            self.ident()?.0
        } else if matches!(self.cur.peek().map(|t| &t.kind), Some(TokenKind::Ident(s)) if !RESERVED.contains(&s.to_ascii_lowercase().as_str()))
        {
            self.ident()?.0
        } else {
            name.clone()
        };
        Ok(TableRef { name, alias, pos })
    }

    fn literal(&mut self) -> Result<Value, QueryError> {
        let pos = self.cur.pos();
        match self.cur.next().map(|t| t.kind) {
            Some(TokenKind::Str(s)) => Ok(Value::Text(s)),
            Some(TokenKind::Number(n)) => Ok(Value::Number(n)),
            Some(TokenKind::Ident(s)) if s.eq_ignore_ascii_case("null") => Ok(Value::Null),
            _ => Err(error_at(pos, "expected a literal")),
        }
    }

    fn operand(&mut self) -> Result<Operand, QueryError> {
        match self.cur.peek().map(|t| &t.kind) {
            Some(TokenKind::Str(_)) | Some(TokenKind::Number(_)) => Ok(Operand::Lit(self.literal()?)),
            _ => Ok(Operand::Col(self.colref()?)),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        self.expect_keyword("select")?;
        let distinct = self.cur.eat_keyword("distinct");
        let columns = if self.cur.eat_symbol("*") {
            None
        } else {
            let mut cols = Vec::new();
            loop {
                let c = self.colref()?;
                let alias = if self.cur.eat_keyword("as") {
                    Some(self.ident()?.0)
                } else {
                    None
                };
                cols.push((c, alias));
                if !self.cur.eat_symbol(",") {
                    break;
                }
            }
            Some(cols)
        };
        self.expect_keyword("from")?;
        let from = self.table_ref()?;
        let mut joins = Vec::new();
        while self.cur.eat_keyword("join") {
            let table = self.table_ref()?;
            self.expect_keyword("on")?;
            let left = self.colref()?;
            if !self.cur.eat_symbol("=") {
                return Err(error_at(self.cur.pos(), "expected '=' in join condition"));
            }
            let right = self.colref()?;
            joins.push(Join { table, left, right });
        }
        let filter = if self.cur.eat_keyword("where") {
            Some(self.expr()?)
        } else {
            None
        };
        let mut order = Vec::new();
        if self.cur.eat_keyword("order") {
            self.expect_keyword("by")?;
            loop {
                let c = self.colref()?;
                let desc = if self.cur.eat_keyword("desc") {
                    true
                } else {
                    self.cur.eat_keyword("asc");
                    false
                };
                order.push((c, desc));
                if !self.cur.eat_symbol(",") {
                    break;
                }
            }
        }
        let limit = if self.cur.eat_keyword("limit") {
            let pos = self.cur.pos();
            match self.cur.next().map(|t| t.kind) {
                Some(TokenKind::Number(n)) if n >= 0.0 && n.fract() == 0.0 => Some(n as usize),
                _ => return Err(error_at(pos, "expected a non-negative integer after LIMIT")),
            }
        } else {
            None
        };
        if !self.cur.at_end() {
            return Err(error_at(self.cur.pos(), "unexpected trailing input"));
        }
        Ok(Query {
            distinct,
            columns,
            from,
            joins,
            filter,
            order,
            limit,
        })
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let mut lhs = self.term()?;
        while self.cur.eat_keyword("or") {
            lhs = Expr::Or(Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, QueryError> {
        let mut lhs = self.factor()?;
        while self.cur.eat_keyword("and") {
            lhs = Expr::And(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, QueryError> {
        if self.cur.eat_keyword("not") {
            return Ok(Expr::Not(Box::new(self.factor()?)));
        }
        if self.cur.eat_symbol("(") {
            let e = self.expr()?;
            if !self.cur.eat_symbol(")") {
                return Err(error_at(self.cur.pos(), "expected ')'"));
            }
            return Ok(e);
        }
        let lhs = self.operand()?;
        if self.cur.eat_keyword("is") {
            let negated = self.cur.eat_keyword("not");
            let pos = self.cur.pos();
            if !self.cur.eat_keyword("null") {
                return Err(error_at(pos, "expected NULL"));
            }
            let e = Expr::IsNull(lhs);
            return Ok(if negated { Expr::Not(Box::new(e)) } else { e });
        }
        let negated = self.cur.eat_keyword("not");
        if self.cur.eat_keyword("like") {
            let pos = self.cur.pos();
            let pattern = match self.cur.next().map(|t| t.kind) {
                Some(TokenKind::Str(s)) => s,
                _ => return Err(error_at(pos, "expected a pattern string after LIKE")),
            };
            let e = Expr::Like(lhs, pattern);
            return Ok(if negated { Expr::Not(Box::new(e)) } else { e });
        }
        if self.cur.eat_keyword("in") {
            if !self.cur.eat_symbol("(") {
                return Err(error_at(self.cur.pos(), "expected '(' after IN"));
            }
            let mut items = vec![self.literal()?];
            while self.cur.eat_symbol(",") {
                items.push(self.literal()?);
            }
            if !self.cur.eat_symbol(")") {
                return Err(error_at(self.cur.pos(), "expected ')'"));
            }
            let e = Expr::In(lhs, items);
            return Ok(if negated { Expr::Not(Box::new(e)) } else { e });
        }
        if negated {
            return Err(error_at(self.cur.pos(), "expected LIKE or IN after NOT"));
        }
        let pos = self.cur.pos();
        let op = match self.cur.next() {
            Some(Token {
                kind: TokenKind::Symbol(s),
                ..
            }) => match s {
                "=" => CmpOp::Eq,
                "!=" | "<>" => CmpOp::Ne,
                "<" => CmpOp::Lt,
                "<=" => CmpOp::Le,
                ">" => CmpOp::Gt,
                ">=" => CmpOp::Ge,
                _ => return Err(error_at(pos, "expected a comparison operator")),
            },
            _ => return Err(error_at(pos, "expected a comparison operator")),
        };
        let rhs = self.operand()?;
        Ok(Expr::Cmp(lhs, op, rhs))
    }
}

/// Checks a query for syntax errors without running it.
pub fn validate(query: &str) -> Result<(), QueryError> {
    parse(query).map(|_| ())
}

fn parse(query: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(query).map_err(|e| error_at(e.pos, e.message))?;
    let mut parser = Parser {
        cur: Cursor::new(tokens, query.len()),
    };
    parser.query()
}

/// Column layout of the rows flowing through a query: (alias, column).
struct Schema(Vec<(String, String)>);

impl Schema {
    fn resolve(&self, c: &ColRef) -> Result<usize, QueryError> {
        let hits: Vec<usize> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, (alias, col))| {
                col.eq_ignore_ascii_case(&c.column)
                    && c.table.as_ref().is_none_or(|t| t.eq_ignore_ascii_case(alias))
            })
            .map(|(i, _)| i)
            .collect();
        match hits.len() {
            1 => Ok(hits[0]),
            0 => Err(error_at(c.pos, format!("unknown column '{}'", display_col(c)))),
            _ => Err(error_at(c.pos, format!("ambiguous column '{}'", display_col(c)))),
        }
    }
}

fn display_col(c: &ColRef) -> String {
    match &c.table {
        Some(t) => format!("{t}.{}", c.column),
        None => c.column.clone(),
    }
}

fn lookup<'a>(surface: &'a Surface, t: &TableRef) -> Result<&'a Table, QueryError> {
    surface
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(&t.name))
        .map(|(_, table)| table)
        .ok_or_else(|| error_at(t.pos, format!("unknown table '{}'", t.name)))
}

fn join_key(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::Number(n) => Some(format!("n:{n}")),
        Value::Text(s) => Some(format!("s:{s}")),
    }
}

fn compare(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.partial_cmp(y),
        (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

/// Total order used by ORDER BY: NULL, then numbers, then text.
fn sort_cmp(a: &Value, b: &Value) -> Ordering {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Null => 0,
            Value::Number(_) => 1,
            Value::Text(_) => 2,
        }
    }
    compare(a, b).unwrap_or_else(|| rank(a).cmp(&rank(b)))
}

fn like(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    // dp[j]: pattern prefix of length j matches the text prefix consumed so far
    let mut dp = vec![false; p.len() + 1];
    dp[0] = true;
    for j in 1..=p.len() {
        dp[j] = dp[j - 1] && p[j - 1] == '%';
    }
    for &ch in &t {
        let mut next = vec![false; p.len() + 1];
        for j in 1..=p.len() {
            next[j] = match p[j - 1] {
                '%' => next[j - 1] || dp[j],
                '_' => dp[j - 1],
                c => dp[j - 1] && c == ch,
            };
        }
        dp = next;
    }
    dp[p.len()]
}

enum Bound {
    Col(usize),
    Lit(Value),
}

enum Compiled {
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
    Not(Box<Compiled>),
    Cmp(Bound, CmpOp, Bound),
    Like(Bound, String),
    In(Bound, Vec<Value>),
    IsNull(Bound),
}

fn bind(op: &Operand, schema: &Schema) -> Result<Bound, QueryError> {
    Ok(match op {
        Operand::Col(c) => Bound::Col(schema.resolve(c)?),
        Operand::Lit(v) => Bound::Lit(v.clone()),
    })
}

fn compile(e: &Expr, schema: &Schema) -> Result<Compiled, QueryError> {
    Ok(match e {
        Expr::And(a, b) => Compiled::And(Box::new(compile(a, schema)?), Box::new(compile(b, schema)?)),
        Expr::Or(a, b) => Compiled::Or(Box::new(compile(a, schema)?), Box::new(compile(b, schema)?)),
        Expr::Not(a) => Compiled::Not(Box::new(compile(a, schema)?)),
        Expr::Cmp(l, op, r) => Compiled::Cmp(bind(l, schema)?, *op, bind(r, schema)?),
        Expr::Like(l, p) => Compiled::Like(bind(l, schema)?, p.clone()),
        Expr::In(l, items) => Compiled::In(bind(l, schema)?, items.clone()),
        Expr::IsNull(l) => Compiled::IsNull(bind(l, schema)?),
    })
}

fn value<'a>(b: &'a Bound, row: &'a [Value]) -> &'a Value {
    match b {
        Bound::Col(i) => &row[*i],
        Bound::Lit(v) => v,
    }
}

fn eval(e: &Compiled, row: &[Value]) -> bool {
    match e {
        Compiled::And(a, b) => eval(a, row) && eval(b, row),
        Compiled::Or(a, b) => eval(a, row) || eval(b, row),
        Compiled::Not(a) => !eval(a, row),
        Compiled::Cmp(l, op, r) => {
            let Some(ord) = compare(value(l, row), value(r, row)) else {
                return false;
            };
            match op {
                CmpOp::Eq => ord == Ordering::Equal,
                CmpOp::Ne => ord != Ordering::Equal,
                CmpOp::Lt => ord == Ordering::Less,
                CmpOp::Le => ord != Ordering::Greater,
                CmpOp::Gt => ord == Ordering::Greater,
                CmpOp::Ge => ord != Ordering::Less,
            }
        }
        Compiled::Like(l, p) => match value(l, row) {
            Value::Text(s) => like(s, p),
            _ => false,
        },
        Compiled::In(l, items) => {
            let v = value(l, row);
            items.iter().any(|i| compare(v, i) == Some(Ordering::Equal))
        }
        Compiled::IsNull(l) => matches!(value(l, row), Value::Null),
    }
}

/// Parses and runs `query` against `surface`.
pub fn execute(query: &str, surface: &Surface) -> Result<Table, QueryError> {
    let q = parse(query)?;

    let base = lookup(surface, &q.from)?;
    let mut schema = Schema(
        base.columns
            .iter()
            .map(|c| (q.from.alias.clone(), c.clone()))
            .collect(),
    );
    let mut rows: Vec<Vec<Value>> = base.rows.clone();

    for join in &q.joins {
        let right = lookup(surface, &join.table)?;
        let right_schema = Schema(
            right
                .columns
                .iter()
                .map(|c| (join.table.alias.clone(), c.clone()))
                .collect(),
        );
        // One side of the ON condition must name the newly joined table.
        let (left_idx, right_idx) = match (schema.resolve(&join.left), right_schema.resolve(&join.right)) {
            (Ok(l), Ok(r)) => (l, r),
            (first_l, first_r) => match (schema.resolve(&join.right), right_schema.resolve(&join.left)) {
                (Ok(l), Ok(r)) => (l, r),
                _ => return Err(first_l.err().or(first_r.err()).expect("one side failed")),
            },
        };
        let mut index: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in right.rows.iter().enumerate() {
            if let Some(k) = join_key(&r[right_idx]) {
                index.entry(k).or_default().push(i);
            }
        }
        let mut joined = Vec::new();
        for l in &rows {
            if let Some(k) = join_key(&l[left_idx]) {
                for &ri in index.get(&k).map(Vec::as_slice).unwrap_or_default() {
                    let mut combined = l.clone();
                    combined.extend(right.rows[ri].iter().cloned());
                    joined.push(combined);
                }
            }
        }
        rows = joined;
        schema.0.extend(right_schema.0);
    }

    if let Some(f) = &q.filter {
        let compiled = compile(f, &schema)?;
        rows.retain(|r| eval(&compiled, r));
    }

    if !q.order.is_empty() {
        let keys: Vec<(usize, bool)> = q
            .order
            .iter()
            .map(|(c, desc)| schema.resolve(c).map(|i| (i, *desc)))
            .collect::<Result<_, _>>()?;
        rows.sort_by(|a, b| {
            for &(i, desc) in &keys {
                let o = sort_cmp(&a[i], &b[i]);
                let o = if desc { o.reverse() } else { o };
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        });
    }

    let single_table = q.joins.is_empty();
    let (columns, picks): (Vec<String>, Vec<usize>) = match &q.columns {
        None => schema
            .0
            .iter()
            .enumerate()
            .map(|(i, (alias, col))| {
                let name = if single_table {
                    col.clone()
                } else {
                    format!("{alias}.{col}")
                };
                (name, i)
            })
            .unzip(),
        Some(cols) => {
            let mut out = (Vec::new(), Vec::new());
            for (c, alias) in cols {
                out.0.push(alias.clone().unwrap_or_else(|| c.column.clone()));
                out.1.push(schema.resolve(c)?);
            }
            out
        }
    };

    let mut projected: Vec<Vec<Value>> = rows
        .into_iter()
        .map(|r| picks.iter().map(|&i| r[i].clone()).collect())
        .collect();
    if q.distinct {
        let mut seen = HashSet::new();
        projected.retain(|r| seen.insert(serde_json::to_string(r).unwrap_or_default()));
    }
    if let Some(n) = q.limit {
        projected.truncate(n);
    }
    Ok(Table {
        columns,
        rows: projected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surface() -> Surface {
        let mut s = Surface::new();
        let mut triples = Table::new(&["run_id", "subject_code_id", "predicate", "object_value"]);
        for (subj, obj) in [("D1", "fever"), ("D1", "cough"), ("D2", "rash"), ("M1", "nausea")] {
            triples.rows.push(vec![
                Value::Text("run-1".into()),
                Value::Text(subj.into()),
                Value::Text("has_finding".into()),
                Value::Text(obj.into()),
            ]);
        }
        let mut members = Table::new(&["code_set_id", "code_id"]);
        for c in ["D1", "D2"] {
            members
                .rows
                .push(vec![Value::Text("cs-1".into()), Value::Text(c.into())]);
        }
        let mut nums = Table::new(&["k", "v"]);
        nums.rows.push(vec![Value::Text("a".into()), Value::Number(2.0)]);
        nums.rows.push(vec![Value::Text("b".into()), Value::Number(10.0)]);
        nums.rows.push(vec![Value::Text("c".into()), Value::Null]);
        s.insert("triples".into(), triples);
        s.insert("code_set_members".into(), members);
        s.insert("nums".into(), nums);
        s
    }

    #[test]
    fn join_filters_to_code_set_members() {
        let t = execute(
            "SELECT t.subject_code_id, t.object_value FROM triples t \
             JOIN code_set_members m ON t.subject_code_id = m.code_id \
             WHERE m.code_set_id = 'cs-1' ORDER BY object_value",
            &surface(),
        )
        .unwrap();
        assert_eq!(t.columns, ["subject_code_id", "object_value"]);
        let objs: Vec<_> = t.rows.iter().map(|r| r[1].as_text()).collect();
        assert_eq!(objs, ["cough", "fever", "rash"]);
    }

    #[test]
    fn star_distinct_limit_and_like() {
        let s = surface();
        let t = execute("select distinct subject_code_id from triples where object_value like '%e%'", &s).unwrap();
        assert_eq!(t.rows.len(), 2);
        let t = execute("SELECT * FROM triples LIMIT 1", &s).unwrap();
        assert_eq!(t.columns.len(), 4);
        assert_eq!(t.rows.len(), 1);
        let t = execute("SELECT k FROM nums WHERE v >= 2 AND NOT k IN ('b')", &s).unwrap();
        assert_eq!(t.rows, vec![vec![Value::Text("a".into())]]);
        let t = execute("SELECT k FROM nums WHERE v IS NULL", &s).unwrap();
        assert_eq!(t.rows.len(), 1);
        let t = execute("SELECT k FROM nums ORDER BY v DESC", &s).unwrap();
        assert_eq!(t.rows[0], vec![Value::Text("b".into())]);
    }

    #[test]
    fn numbers_compare_numerically() {
        let t = execute("SELECT k FROM nums WHERE v > 3", &surface()).unwrap();
        assert_eq!(t.rows, vec![vec![Value::Text("b".into())]]);
    }

    #[test]
    fn errors_report_positions() {
        let s = surface();
        let e = execute("SELECT x FROM triples", &s).unwrap_err();
        assert_eq!(e.position, 7);
        let e = execute("SELECT * FROM nope", &s).unwrap_err();
        assert_eq!(e.position, 14);
        let e = execute("SELEC * FROM triples", &s).unwrap_err();
        assert_eq!(e.position, 0);
        let e = execute("SELECT * FROM triples WHERE", &s).unwrap_err();
        assert_eq!(e.position, 27);
        assert!(execute("SELECT run_id FROM triples JOIN code_set_members ON run_id = code_set_id, x", &s).is_err());
    }

    #[test]
    fn ambiguous_unqualified_column_is_rejected() {
        let mut s = surface();
        s.insert("other".into(), Table::new(&["code_id"]));
        let e = execute(
            "SELECT code_id FROM code_set_members JOIN other ON code_set_members.code_id = other.code_id",
            &s,
        )
        .unwrap_err();
        assert!(e.message.contains("ambiguous"));
    }

    #[test]
    fn like_patterns() {
        assert!(like("fracture", "frac%"));
        assert!(like("fracture", "%ture"));
        assert!(like("abc", "a_c"));
        assert!(!like("abc", "a_"));
        assert!(like("", "%"));
    }
}
