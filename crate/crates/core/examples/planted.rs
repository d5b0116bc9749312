use sgr::eval::{evaluate, Protocol, Task};
use sgr::synth::{planted_graph, PlantedConfig};
use sgr::{embed, EmbedParams};

fn main() {
    let cfg = PlantedConfig::default();
    let mut p = Protocol::new(Task::Clustering);
    p.repeats = 1;
    let (mut full, mut topo) = (0.0, 0.0);
    let seeds = 20;
    for s in 0..seeds {
        let g = planted_graph(&cfg, s).unwrap();
        p.seed = s;
        let a = evaluate(&embed(&g, &EmbedParams::default()).unwrap(), &g, &p).unwrap();
        let t = g.topology_only().unwrap();
        let b = evaluate(&embed(&t, &EmbedParams::default()).unwrap(), &t, &p).unwrap();
        println!("seed {s}: full {:.3} topo {:.3}", a.nmi.unwrap(), b.nmi.unwrap());
        full += a.nmi.unwrap();
        topo += b.nmi.unwrap();
    }
    println!("mean full {:.3} topo {:.3}", full / seeds as f64, topo / seeds as f64);
}
