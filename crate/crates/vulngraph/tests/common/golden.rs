//! Hand-traced CFGs shared by the golden tests and the acceptance suite.

use vulngraph::java::NodeKind::{self, *};

pub struct GoldenCase {
    pub name: &'static str,
    pub src: &'static str,
    pub nodes: &'static [(NodeKind, &'static str)],
    pub edges: &'static [(usize, usize)],
}

pub const CASES: &[GoldenCase] = &[
    GoldenCase {
        name: "empty_body",
        src: "void f(){}",
        nodes: &[(Entry, ""), (Exit, "")],
        edges: &[(0, 1)],
    },
    GoldenCase {
        name: "single_return",
        src: "int f(){return 1;}",
        nodes: &[(Entry, ""), (Return, "return 1;"), (Exit, "")],
        edges: &[(0, 1), (1, 2)],
    },
    GoldenCase {
        name: "if_else_diamond_into_return",
        src: "int f(int x){if(x>0){x=1;}else{x=2;}return x;}",
        nodes: &[
                (Entry, ""),
                (Branch, "if(x>0)"),
                (Statement, "x=1;"),
                (Statement, "x=2;"),
                (Return, "return x;"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5)],
    },
    GoldenCase {
        name: "while_loop_back_edge",
        src: "void f(int x){while(x>0){x--;}}",
        nodes: &[(Entry, ""), (LoopHeader, "while(x>0)"), (Statement, "x--;"), (Exit, "")],
        edges: &[(0, 1), (1, 2), (2, 1), (1, 3)],
    },
    GoldenCase {
        name: "if_without_else_falls_through",
        src: "void f(int x){if(x>0){g();}h();}",
        nodes: &[(Entry, ""), (Branch, "if(x>0)"), (Statement, "g();"), (Statement, "h();"), (Exit, "")],
        edges: &[(0, 1), (1, 2), (1, 3), (2, 3), (3, 4)],
    },
    GoldenCase {
        name: "early_return",
        src: "int f(int x){if(x<0){return -1;}x++;return x;}",
        nodes: &[
                (Entry, ""),
                (Branch, "if(x<0)"),
                (Return, "return -1;"),
                (Statement, "x++;"),
                (Return, "return x;"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (1, 3), (2, 5), (3, 4), (4, 5)],
    },
    GoldenCase {
        name: "classic_for_loop",
        src: "void f(){for(int i=0;i<3;i++){g(i);}done();}",
        nodes: &[
                (Entry, ""),
                (Statement, "int i=0"),
                (LoopHeader, "for(int i=0;i<3;i++)"),
                (Statement, "g(i);"),
                (Statement, "i++"),
                (Statement, "done();"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 2), (2, 5), (5, 6)],
    },
    GoldenCase {
        name: "for_each_loop",
        src: "void f(java.util.List<String> xs){for(String s : xs){use(s);}}",
        nodes: &[(Entry, ""), (LoopHeader, "for(String s : xs)"), (Statement, "use(s);"), (Exit, "")],
        edges: &[(0, 1), (1, 2), (1, 3), (2, 1)],
    },
    GoldenCase {
        name: "do_while_loop",
        src: "void f(int x){do{x--;}while(x>0);}",
        nodes: &[(Entry, ""), (Statement, "x--;"), (LoopHeader, "while(x>0)"), (Exit, "")],
        edges: &[(0, 1), (1, 2), (2, 1), (2, 3)],
    },
    GoldenCase {
        name: "try_catch_edges_from_try_entry",
        src: "void f(){try{a();}catch(Exception e){b();}c();}",
        nodes: &[
                (Entry, ""),
                (Try, "try"),
                (Statement, "a();"),
                (Catch, "catch(Exception e)"),
                (Statement, "b();"),
                (Statement, "c();"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (1, 3), (2, 5), (3, 4), (4, 5), (5, 6)],
    },
    GoldenCase {
        name: "try_catch_finally",
        src: "void f(){try{a();}catch(IOException e){log(e);}finally{close();}}",
        nodes: &[
                (Entry, ""),
                (Try, "try"),
                (Statement, "a();"),
                (Catch, "catch(IOException e)"),
                (Statement, "log(e);"),
                (Statement, "close();"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (1, 3), (2, 5), (3, 4), (4, 5), (5, 6)],
    },
    GoldenCase {
        name: "break_and_continue",
        src: "void f(int n){while(n>0){if(n==5){break;}if(n%2==0){n--;continue;}n-=3;}end();}",
        nodes: &[
                (Entry, ""),
                (LoopHeader, "while(n>0)"),
                (Branch, "if(n==5)"),
                (Statement, "break;"),
                (Branch, "if(n%2==0)"),
                (Statement, "n--;"),
                (Statement, "continue;"),
                (Statement, "n-=3;"),
                (Statement, "end();"),
                (Exit, ""),
            ],
        edges: &[
                (0, 1),
                (1, 2),
                (1, 8),
                (2, 3),
                (2, 4),
                (3, 8),
                (4, 5),
                (4, 7),
                (5, 6),
                (6, 1),
                (7, 1),
                (8, 9),
            ],
    },
    GoldenCase {
        name: "switch_with_fallthrough_and_default",
        src: "void f(int k){switch(k){case 1: a(); case 2: b(); break; default: c();}d();}",
        nodes: &[
                (Entry, ""),
                (Branch, "switch(k)"),
                (Statement, "a();"),
                (Statement, "b();"),
                (Statement, "break;"),
                (Statement, "c();"),
                (Statement, "d();"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (1, 3), (1, 5), (2, 3), (3, 4), (4, 6), (5, 6), (6, 7)],
    },
    GoldenCase {
        name: "arrow_switch_without_default",
        src: "void f(int k){switch(k){case 1 -> a(); case 2 -> b();}c();}",
        nodes: &[
                (Entry, ""),
                (Branch, "switch(k)"),
                (Statement, "a();"),
                (Statement, "b();"),
                (Statement, "c();"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (1, 3), (1, 4), (2, 4), (3, 4), (4, 5)],
    },
    GoldenCase {
        name: "throw_goes_to_exit",
        src: "void f(Object o){if(o==null){throw new IllegalArgumentException(\"o\");}use(o);}",
        nodes: &[
                (Entry, ""),
                (Branch, "if(o==null)"),
                (Throw, "throw new IllegalArgumentException(\"o\");"),
                (Statement, "use(o);"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (1, 3), (2, 4), (3, 4)],
    },
    GoldenCase {
        name: "labeled_break_leaves_outer_loop",
        src: "void f(){outer: for(int i=0;i<3;i++){while(true){break outer;}}}",
        nodes: &[
                (Entry, ""),
                (Statement, "int i=0"),
                (LoopHeader, "for(int i=0;i<3;i++)"),
                (LoopHeader, "while(true)"),
                (Statement, "break outer;"),
                (Statement, "i++"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (2, 3), (2, 6), (3, 4), (3, 5), (4, 6), (5, 2)],
    },
    GoldenCase {
        name: "try_with_resources_and_return",
        src: "String f(String p) throws IOException {try(BufferedReader r = open(p)){return r.readLine();}}",
        nodes: &[
                (Entry, ""),
                (Try, "try(BufferedReader r = open(p))"),
                (Return, "return r.readLine();"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (2, 3)],
    },
    GoldenCase {
        name: "lambda_is_an_opaque_statement",
        src: "void f(){Runnable r = () -> { go(); }; r.run();}",
        nodes: &[
                (Entry, ""),
                (Statement, "Runnable r = () -> { go(); };"),
                (Statement, "r.run();"),
                (Exit, ""),
            ],
        edges: &[(0, 1), (1, 2), (2, 3)],
    },
    GoldenCase {
        name: "empty_then_branch_is_demoted",
        src: "void f(boolean c){if(c){}g();}",
        nodes: &[(Entry, ""), (Statement, "if(c)"), (Statement, "g();"), (Exit, "")],
        edges: &[(0, 1), (1, 2), (2, 3)],
    },
];
