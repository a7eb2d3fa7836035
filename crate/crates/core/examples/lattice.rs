//! The capability lattice: implied kinds and incompatible pairs.

use caplet::capability::{implication_closure, incompatible, CapKind, CapSet};

fn main() {
    for k in CapKind::ALL {
        let implied: Vec<String> = implication_closure(CapSet::single(k)).iter().filter(|x| *x != k).map(|x| x.to_string()).collect();
        println!("{k:>10} => {}", implied.join(", "));
    }
    println!();
    for (i, a) in CapKind::ALL.iter().enumerate() {
        for b in &CapKind::ALL[i..] {
            if incompatible(*a, *b) {
                println!("{a} # {b}");
            }
        }
    }
}
