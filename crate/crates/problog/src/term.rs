//! First-order terms and the symbol table they are printed against.

use std::collections::HashMap;
use std::fmt::Write as _;

/// Interned functor/atom symbol.
pub type Sym = u32;

/// Maps atom and functor names to dense [`Sym`] ids.
#[derive(Debug, Default, Clone)]
pub struct SymbolTable {
    names: Vec<String>,
    index: HashMap<String, Sym>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Sym {
        if let Some(&s) = self.index.get(name) {
            return s;
        }
        let s = self.names.len() as Sym;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), s);
        s
    }

    pub fn lookup(&self, name: &str) -> Option<Sym> {
        self.index.get(name).copied()
    }

    pub fn name(&self, sym: Sym) -> &str {
        &self.names[sym as usize]
    }
}

/// A Prolog term. Variables are clause-local indices; the engine renames
/// them apart by offsetting into a shared binding store.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(usize),
    Atom(Sym),
    Int(i64),
    Compound(Sym, Vec<Term>),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Atom(_) | Term::Int(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// `Some((functor, arity))` for atoms and compounds, `None` otherwise.
    pub fn functor(&self) -> Option<(Sym, usize)> {
        match self {
            Term::Atom(s) => Some((*s, 0)),
            Term::Compound(s, args) => Some((*s, args.len())),
            _ => None,
        }
    }

    pub fn is_callable(&self) -> bool {
        self.functor().is_some()
    }

    /// Shifts every variable index by `offset`. Used to rename a stored
    /// clause apart from the goal it resolves against.
    pub fn rename(&self, offset: usize) -> Term {
        match self {
            Term::Var(i) => Term::Var(i + offset),
            Term::Atom(_) | Term::Int(_) => self.clone(),
            Term::Compound(s, args) => {
                Term::Compound(*s, args.iter().map(|a| a.rename(offset)).collect())
            }
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Term::Var(i) => Some(*i),
            Term::Atom(_) | Term::Int(_) => None,
            Term::Compound(_, args) => args.iter().filter_map(Term::max_var).max(),
        }
    }
}

fn atom_needs_quotes(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {
            !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        _ => true,
    }
}

fn write_atom(out: &mut String, name: &str) {
    if atom_needs_quotes(name) {
        out.push('\'');
        for c in name.chars() {
            if c == '\'' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('\'');
    } else {
        out.push_str(name);
    }
}

/// Renders a term in re-parseable ProbLog syntax. Cons cells print in list
/// notation; unnamed variables print as `_Gn`.
pub fn pretty(term: &Term, symbols: &SymbolTable, var_names: &[String]) -> String {
    let mut out = String::new();
    write_term(&mut out, term, symbols, var_names);
    out
}

fn write_term(out: &mut String, term: &Term, symbols: &SymbolTable, var_names: &[String]) {
    match term {
        Term::Var(i) => {
            if let Some(name) = var_names.get(*i) {
                out.push_str(name);
            } else {
                let _ = write!(out, "_G{i}");
            }
        }
        Term::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Term::Atom(s) => write_atom(out, symbols.name(*s)),
        Term::Compound(s, args) => {
            if symbols.name(*s) == "." && args.len() == 2 {
                write_list(out, term, symbols, var_names);
                return;
            }
            write_atom(out, symbols.name(*s));
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_term(out, arg, symbols, var_names);
            }
            out.push(')');
        }
    }
}

fn write_list(out: &mut String, term: &Term, symbols: &SymbolTable, var_names: &[String]) {
    out.push('[');
    let mut cur = term;
    let mut first = true;
    loop {
        match cur {
            Term::Compound(s, args) if symbols.name(*s) == "." && args.len() == 2 => {
                if !first {
                    out.push(',');
                }
                write_term(out, &args[0], symbols, var_names);
                first = false;
                cur = &args[1];
            }
            Term::Atom(s) if symbols.name(*s) == "[]" => break,
            other => {
                out.push('|');
                write_term(out, other, symbols, var_names);
                break;
            }
        }
    }
    out.push(']');
}
