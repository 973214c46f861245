// Optional runtime dependency: present only when the user installs it to use
// real pretrained encoders. Loaded via dynamic import with failure handling.
declare module "@huggingface/transformers" {
  export function pipeline(task: string, model: string): Promise<unknown>;
}
