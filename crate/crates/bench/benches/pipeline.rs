use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use irisgraph::dataset::{pad_graph, PairDataset, PairIndex};
use irisgraph::experiments::synthetic::{synthesize_image, SyntheticSpec};
use irisgraph::graph_extract::{build_edges, connected_components, discretize, binarize, extract_graph};
use irisgraph::gsnn::{
    backward, batch_gradient, branch_forward, prepare_all, AdjacencyMode, Architecture, Combine, ModelOptions,
};
use irisgraph::imaging::{preprocess, PreprocessOptions, Raster, SpectralFilter};
use irisgraph::seed::rng_for;
use irisgraph::{ExtractOptions, Image, ModelParams, SourceId};

const CAP: usize = 200;

fn corpus_image(user: usize, index: usize) -> Image {
    synthesize_image(&SyntheticSpec::default(), user, index)
}

fn source(user: usize, index: usize) -> SourceId {
    SourceId {
        user: format!("u{user:03}"),
        session: 0,
        index: index as u32,
    }
}

fn imaging(c: &mut Criterion) {
    let raster = Raster::Gray(corpus_image(0, 0));
    let plain = PreprocessOptions::default();
    let filtered = PreprocessOptions {
        filter: Some(SpectralFilter::new(7).unwrap()),
        ..plain
    };
    c.bench_function("preprocess_200", |b| b.iter(|| preprocess(black_box(&raster), None, &plain).unwrap()));
    c.bench_function("preprocess_200_filtered", |b| {
        b.iter(|| preprocess(black_box(&raster), None, &filtered).unwrap())
    });
}

fn extraction(c: &mut Criterion) {
    let image = corpus_image(1, 0);
    let options = ExtractOptions::default();
    let bins = binarize(&discretize(&image, options.delta).unwrap());
    c.bench_function("label_12_bins_200", |b| {
        b.iter(|| bins.iter().map(|img| connected_components(black_box(img)).len()).sum::<usize>())
    });
    c.bench_function("extract_graph_200", |b| {
        b.iter(|| extract_graph(black_box(&image), source(1, 0), &options).unwrap())
    });
    let graph = extract_graph(&image, source(1, 0), &options).unwrap();
    let boxes: Vec<_> = graph.nodes.iter().map(|n| n.bbox).collect();
    c.bench_function("build_edges", |b| b.iter(|| build_edges(black_box(&boxes))));
}

fn network(c: &mut Criterion) {
    let options = ExtractOptions::default();
    let graphs: Vec<_> = (0..4)
        .flat_map(|u| (0..8).map(move |i| (u, i)))
        .map(|(u, i)| pad_graph(&extract_graph(&corpus_image(u, i), source(u, i), &options).unwrap(), CAP).unwrap())
        .collect();
    let arch = Architecture::default();
    let params = ModelParams::init(arch, &mut rng_for(0, "bench", 0));
    let model = ModelOptions {
        adjacency: AdjacencyMode::Binary,
        combine: Combine::Absolute,
    };

    c.bench_function("branch_forward_full_width", |b| {
        b.iter(|| branch_forward(black_box(&graphs[0]), &params, AdjacencyMode::Binary).unwrap())
    });
    let dataset = PairDataset::build(graphs, 0);
    c.bench_function("pair_backward_full_width", |b| {
        b.iter(|| backward(dataset.pair(0), &params, &model).unwrap())
    });

    let prepared = prepare_all(&dataset.graphs, AdjacencyMode::Binary);
    let batch: Vec<PairIndex> = dataset.pairs.iter().take(32).copied().collect();
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("batch_gradient_32_pairs", |b| {
        b.iter_batched(
            || batch.clone(),
            |pairs| batch_gradient(&prepared, &pairs, &params, Combine::Absolute).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, imaging, extraction, network);
criterion_main!(benches);
