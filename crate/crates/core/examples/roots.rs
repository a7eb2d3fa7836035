//! Root places per program point and the frame set of each statement.

use caplet::flow;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = caplet::corpus::corpus_dir().join("clients/refcell_client.cap");
    let c = caplet::driver::check_file(&path)?;
    print!("{}", caplet::driver::dump_roots(&c));
    let fid = c.prog.find_fn("refcell_client").expect("client fn");
    let f = &c.prog.fns[fid];
    let g = flow::build_cfg(&c.prog, f);
    let info = flow::analyze(&c.prog, f, &g);
    for (edge, vars) in flow::frame_sets(&info, &g) {
        let names: Vec<&str> = vars.iter().map(|v| f.locals[*v].name.as_str()).collect();
        println!("edge {edge}: unused {{{}}}", names.join(", "));
    }
    Ok(())
}
