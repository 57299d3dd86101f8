//! Frontend: lexing, parsing, validation, inlining, pretty-printing and
//! parallel-segment partitioning for the mini-OpenMP input language.
//!
//! Input files use the `.comp.c` extension. Diagnostics render as
//! `file:line:col: severity: message`.

pub mod ast;
pub mod diag;
pub mod inline;
pub mod parser;
pub mod printer;
pub mod segment;
mod token;

pub use ast::*;
pub use diag::{Diagnostic, Diagnostics, Severity, SourceProgram};
pub use inline::inline_functions;
pub use parser::parse;
pub use printer::emit_source;
pub use segment::{partition_segments, ParallelSegment, SegmentKind};

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(src: &str) -> Ast {
        parse(&SourceProgram::new("t.comp.c", src)).expect("parse should succeed")
    }

    fn parse_err(src: &str) -> Diagnostics {
        parse(&SourceProgram::new("t.comp.c", src)).expect_err("parse should fail")
    }

    #[test]
    fn minimal_parallel_for_program() {
        let ast = parse_ok(
            "void main() {\n int i; int s; int a[100]; int N;\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < N; i++) { s = s + a[i]; }\n }\n}",
        );
        let region = ast.functions[0]
            .body
            .stmts
            .iter()
            .find_map(|s| match &s.node {
                Stmt::Parallel(r) => Some(r),
                _ => None,
            })
            .expect("one parallel region");
        assert_eq!(region.body.stmts.len(), 1);
        assert!(matches!(region.body.stmts[0].node, Stmt::OmpFor(_)));
    }

    #[test]
    fn region_with_pre_and_post_blocks() {
        // the "Initial Loop" layout: leading statements, omp for, trailing
        let ast = parse_ok(
            "void main() {\n int i; int n; double a[10]; double s;\n #pragma omp parallel\n {\n s = 0.0;\n #pragma omp for\n for (i = 0; i < n; i++) { a[i] = s; }\n s = 1.0;\n }\n}",
        );
        let region = ast.functions[0]
            .body
            .stmts
            .iter()
            .find_map(|s| match &s.node {
                Stmt::Parallel(r) => Some(r.clone()),
                _ => None,
            })
            .unwrap();
        let kinds: Vec<_> = partition_segments(&region, 0)
            .iter()
            .map(|s| s.kind)
            .collect();
        assert_eq!(
            kinds,
            vec![
                SegmentKind::PlainBlock,
                SegmentKind::WorksharingFor,
                SegmentKind::PlainBlock
            ]
        );
    }

    #[test]
    fn nested_parallel_region_is_rejected() {
        let d = parse_err(
            "void main() {\n #pragma omp parallel\n {\n #pragma omp parallel\n {\n }\n }\n}",
        );
        assert!(
            d.render().contains("nested parallel region"),
            "{}",
            d.render()
        );
        assert!(d.render().starts_with("t.comp.c:4:"), "{}", d.render());
    }

    #[test]
    fn worksharing_outside_parallel_is_rejected() {
        let d = parse_err(
            "void main() {\n int i;\n #pragma omp for\n for (i = 0; i < 4; i++) { i = i; }\n}",
        );
        assert!(d.render().contains("immediate child of a parallel region"));
    }

    #[test]
    fn non_canonical_omp_loop_is_rejected() {
        // bound references a variable assigned in the body
        let d = parse_err(
            "void main() {\n int i; int n;\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < n; i++) { n = n + 1; }\n }\n}",
        );
        assert!(
            d.render().contains("non-canonical omp for loop"),
            "{}",
            d.render()
        );
    }

    #[test]
    fn non_positive_step_is_rejected() {
        let d = parse_err(
            "void main() {\n int i; int n; int a[4];\n #pragma omp parallel\n {\n #pragma omp for\n for (i = 0; i < n; i = i + 0) { a[i] = 0; }\n }\n}",
        );
        assert!(
            d.render().contains("step must be positive"),
            "{}",
            d.render()
        );
    }

    #[test]
    fn schedule_clauses_parse_and_roundtrip() {
        let src = "void main() {\n  int i;\n  int a[8];\n  #pragma omp parallel num_threads(4)\n  {\n    #pragma omp for schedule(dynamic, 2) nowait\n    for (i = 0; i < 8; i++) {\n      a[i] = i;\n    }\n  }\n}\n";
        let ast = parse_ok(src);
        let printed = emit_source(&ast);
        assert!(printed.contains("schedule(dynamic, 2) nowait"), "{printed}");
        let re = parse_ok(&printed);
        assert_eq!(ast, re);
    }

    #[test]
    fn roundtrip_is_stable_on_mixed_constructs() {
        let src = r#"
int flag;
double table[16] = {0.0, 0.5, 1.0, 1.5};

void kernel(int n, double xs[]) {
  int i;
  double acc;
  acc = 0.0;
  if (n > 3 && flag != 0) {
    acc = acc + xs[0] * 2.0;
  } else if (n == 2) {
    acc = 1.0;
  } else {
    acc = -1.0;
  }
  while (acc < 10.0) {
    acc = acc + 1.0;
  }
  do {
    acc = acc - 0.25;
  } while (acc > 5.0);
  for (i = 0; i < n; i = i + 2) {
    xs[i] = table[i % 16] + (acc = acc + 1.0);
  }
}

void main() {
  int i;
  double xs[32];
  kernel(4, xs);
  #pragma omp parallel
  {
    #pragma omp sections
    {
      #pragma omp section
      {
        xs[0] = 1.0;
      }
      #pragma omp section
      {
        xs[1] = 2.0;
      }
    }
    #pragma omp barrier
    #pragma omp single
    {
      xs[2] = 3.0;
    }
    #pragma omp atomic
    flag = flag + 1;
  }
}
"#;
        let ast = parse_ok(src);
        let once = emit_source(&ast);
        let re = parse_ok(&once);
        assert_eq!(ast, re, "parse . emit must be the identity");
        let twice = emit_source(&re);
        assert_eq!(once, twice, "printing must be byte-stable");
    }

    #[test]
    fn diagnostics_carry_position() {
        let d = parse_err("void main() {\n  int x = ;\n}\n");
        let msg = d.render();
        assert!(msg.starts_with("t.comp.c:2:"), "{msg}");
        assert!(msg.contains("error"));
    }

    #[test]
    fn inliner_expands_statement_calls() {
        let ast = parse_ok(
            "void add(int k, double v[]) {\n int j;\n for (j = 0; j < k; j++) { v[j] = v[j] + 1.0; }\n}\nvoid main() {\n double data[8];\n add(8, data);\n}",
        );
        let inlined = inline_functions(&ast);
        let main = inlined.function("main").unwrap();
        // the call is replaced by a temp binding plus the loop
        assert!(main
            .body
            .stmts
            .iter()
            .all(|s| !matches!(s.node, Stmt::Call { .. })));
        assert!(main.body.stmts.len() >= 2);
    }

    #[test]
    fn recursive_functions_stay_as_calls() {
        let ast = parse_ok("void rec(int k) {\n rec(k);\n}\nvoid main() {\n rec(3);\n}");
        let inlined = inline_functions(&ast);
        let main = inlined.function("main").unwrap();
        assert!(main
            .body
            .stmts
            .iter()
            .any(|s| matches!(s.node, Stmt::Call { .. })));
    }
}
