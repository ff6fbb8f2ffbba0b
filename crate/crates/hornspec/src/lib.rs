//! Polyvariant specialisation of constrained Horn clauses (CHCs) over
//! linear real arithmetic, controlled by property-based abstraction.
//!
//! The pipeline: a CHC program plus a set of entry facts is specialised by
//! iterating partial evaluation and a generalisation operator built from a
//! finite property set, then emitting one clause set per generated
//! predicate version via an unfold-fold pass.
//!
//! ```
//! use hornspec::syntax::{parse_program, parse_constrained_facts};
//! use hornspec::specializer::{specialize, SpecializeOptions};
//! use hornspec::abstraction::{PropertySet, AbstractionScope};
//! use hornspec::derivation::UnfoldingRule;
//!
//! let program = parse_program("
//!     start :- while0(X,Y,M).
//!     while0(X,Y,M) :- X>0, if0(X,Y,M).
//!     while0(X,Y,M) :- X=<0.
//!     if0(X,Y,M) :- Y<M, Y1=Y+1, while0(X,Y1,M).
//!     if0(X,Y,M) :- Y>=M, X1=X-1, while0(X1,Y,M).
//! ").unwrap();
//! let entry = parse_constrained_facts("start.").unwrap();
//! let props = PropertySet::new(parse_constrained_facts("
//!     while0(A,B,C) :- A>0.   while0(A,B,C) :- A=<0.
//!     while0(A,B,C) :- B<C.   while0(A,B,C) :- B>=C.
//!     if0(A,B,C) :- B<C.      if0(A,B,C) :- B>=C.
//! ").unwrap());
//! let result = specialize(
//!     &program,
//!     &entry,
//!     &props,
//!     &UnfoldingRule::branch_or_recursive(),
//!     AbstractionScope::RecursiveOnly,
//!     &SpecializeOptions::default(),
//! ).unwrap();
//! assert_eq!(result.program.clauses().len(), 9);
//! ```

pub mod abstraction;
pub mod analysis;
pub mod constraints;
pub mod derivation;
pub mod oracle;
pub mod specializer;
pub mod syntax;
