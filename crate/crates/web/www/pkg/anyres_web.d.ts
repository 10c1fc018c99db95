/* tslint:disable */
/* eslint-disable */

/**
 * A generator held by the page, either freshly initialized or loaded from a
 * checkpoint written by the command-line tool.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Generator `G` of a checkpoint file's bytes.
     */
    static fromCheckpoint(bytes: Uint8Array): Demo;
    /**
     * Untrained generator with a small default architecture.
     */
    constructor(seed: bigint);
    /**
     * Full `res x res` RGBA image, assembled from tiles.
     */
    render(seed: bigint, res: number): Uint8Array;
    /**
     * `p x p` RGBA patch at scale `s` and center `(vx, vy)`.
     */
    sample(seed: bigint, scale: number, vx: number, vy: number): Uint8Array;
    /**
     * The patch at `(s, v)` projected into the `p x p` base frame; masked
     * pixels are drawn as a checkerboard.
     */
    warp(seed: bigint, scale: number, vx: number, vy: number): Uint8Array;
    readonly patch: number;
    readonly scaleMax: number;
}

/**
 * Sampler histograms for square images of the given short sides, returned
 * flat as `[global_fraction, scale bins..., center bins...]`.
 */
export function samplerStats(sizes: Uint32Array, patch: number, n: number, bins: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_fromCheckpoint: (a: number, b: number) => [number, number, number];
    readonly demo_new: (a: bigint) => [number, number, number];
    readonly demo_patch: (a: number) => number;
    readonly demo_render: (a: number, b: bigint, c: number) => [number, number, number, number];
    readonly demo_sample: (a: number, b: bigint, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_scaleMax: (a: number) => number;
    readonly demo_warp: (a: number, b: bigint, c: number, d: number, e: number) => [number, number, number, number];
    readonly samplerStats: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
