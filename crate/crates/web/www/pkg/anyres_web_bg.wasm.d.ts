/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_fromCheckpoint: (a: number, b: number) => [number, number, number];
export const demo_new: (a: bigint) => [number, number, number];
export const demo_patch: (a: number) => number;
export const demo_render: (a: number, b: bigint, c: number) => [number, number, number, number];
export const demo_sample: (a: number, b: bigint, c: number, d: number, e: number) => [number, number, number, number];
export const demo_scaleMax: (a: number) => number;
export const demo_warp: (a: number, b: bigint, c: number, d: number, e: number) => [number, number, number, number];
export const samplerStats: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
