//! Purity levels: the same body passes at one level and fails at another.

use caplet::driver;

const SOURCES: [&str; 3] = [
    "#[pure] fn f(c: &Cell<i32>) -> i32 { c.get() }",
    "#[pure_unstable] fn f(c: &Cell<i32>) -> i32 { c.get() }",
    "#[pure] fn f(x: &i32) -> *const i32 { x as *const i32 }",
];

fn main() {
    for src in SOURCES {
        match driver::check_source("example.cap", src) {
            Ok(_) => println!("ok:       {src}"),
            Err(e) => println!("rejected: {src}\n          {e}"),
        }
    }
}
