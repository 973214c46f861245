/** Class-description templates per dataset family; must stay in sync with
 * the consumer's template contract. */

export const DATASET_KINDS = [
  "general",
  "pets",
  "texture",
  "satellite",
  "digits",
  "synthetic",
] as const;

export type DatasetKind = (typeof DATASET_KINDS)[number];

const TEMPLATES: Record<DatasetKind, (c: string) => string> = {
  general: (c) => `a photo of ${c}`,
  pets: (c) => `a photo of ${c}`,
  texture: (c) => `${c} texture`,
  satellite: (c) => `a centered satellite photo of ${c}`,
  digits: (c) => `a photo of digit ${c}`,
  synthetic: (c) => `class ${c}`,
};

export function isDatasetKind(value: string): value is DatasetKind {
  return (DATASET_KINDS as readonly string[]).includes(value);
}

export function describeClass(kind: DatasetKind, className: string): string {
  return TEMPLATES[kind](className);
}
