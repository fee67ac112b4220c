use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Training patches grouped by person.
#[derive(Debug, Clone, Default)]
pub struct PatchDataset {
    persons: Vec<String>,
    patches: Vec<Vec<Tensor<f32>>>,
}

/// Position of one patch inside a [`PatchDataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchRef {
    pub person: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: PatchRef,
    pub positive: PatchRef,
    pub negative: PatchRef,
}

impl Triplet {
    pub fn is_well_formed(&self) -> bool {
        self.anchor.person == self.positive.person
            && self.negative.person != self.anchor.person
            && self.anchor.index != self.positive.index
    }
}

#[derive(Debug, Clone, Default)]
pub struct TripletPool {
    pub triplets: Vec<Triplet>,
    /// Incremented on every rebuild during training.
    pub generation: u64,
}

impl PatchDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a (1,20,20) patch for `person`, creating the person on first use.
    pub fn push(&mut self, person: &str, patch: Tensor<f32>) -> Result<()> {
        if patch.shape() != [1, 20, 20] {
            return Err(Error::shape(format!("training patch shape {:?}", patch.shape())));
        }
        let idx = match self.persons.iter().position(|p| p == person) {
            Some(i) => i,
            None => {
                self.persons.push(person.to_string());
                self.patches.push(Vec::new());
                self.persons.len() - 1
            }
        };
        self.patches[idx].push(patch);
        Ok(())
    }

    pub fn persons(&self) -> &[String] {
        &self.persons
    }

    pub fn person_count(&self) -> usize {
        self.persons.len()
    }

    pub fn patches_of(&self, person: usize) -> &[Tensor<f32>] {
        &self.patches[person]
    }

    pub fn get(&self, r: PatchRef) -> &Tensor<f32> {
        &self.patches[r.person][r.index]
    }

    pub fn len(&self) -> usize {
        self.patches.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Persons that can serve as anchors (at least two patches).
    pub fn anchor_persons(&self) -> Vec<usize> {
        (0..self.persons.len()).filter(|&i| self.patches[i].len() >= 2).collect()
    }

    /// At least one anchor-capable person and a second person with patches.
    pub fn validate(&self) -> Result<()> {
        let populated = self.patches.iter().filter(|p| !p.is_empty()).count();
        if populated < 2 {
            return Err(Error::Dataset(format!(
                "triplet training needs patches from at least 2 persons, found {populated}"
            )));
        }
        if self.anchor_persons().is_empty() {
            return Err(Error::Dataset("no person has the 2 patches an anchor and positive need".into()));
        }
        Ok(())
    }
}

/// Draws one triplet anchored on `person`: anchor uniform over the person's
/// patches, positive uniform over the rest, negative uniform over every
/// other person's patches.
pub fn sample_triplet(dataset: &PatchDataset, person: usize, rng: &mut impl Rng) -> Result<Triplet> {
    let name = dataset.persons.get(person).map(String::as_str).unwrap_or("?");
    let own = dataset
        .patches
        .get(person)
        .ok_or_else(|| Error::invalid(format!("person index {person} out of range")))?
        .len();
    if own < 2 {
        return Err(Error::Dataset(format!(
            "person {name:?} has {own} patch(es); an anchor and a positive need 2"
        )));
    }
    let others = dataset.len() - own;
    if others == 0 {
        return Err(Error::Dataset(format!(
            "no patches from persons other than {name:?} to draw a negative from"
        )));
    }
    let anchor = rng.random_range(0..own);
    let mut positive = rng.random_range(0..own - 1);
    if positive >= anchor {
        positive += 1;
    }
    let mut k = rng.random_range(0..others);
    let mut negative = None;
    for (q, patches) in dataset.patches.iter().enumerate() {
        if q == person {
            continue;
        }
        if k < patches.len() {
            negative = Some(PatchRef { person: q, index: k });
            break;
        }
        k -= patches.len();
    }
    Ok(Triplet {
        anchor: PatchRef { person, index: anchor },
        positive: PatchRef { person, index: positive },
        negative: negative.expect("k < others"),
    })
}

/// `pool_size` triplets with anchors spread equally over anchor-capable
/// persons; the remainder goes to a random subset, one extra each.
pub fn build_pool(dataset: &PatchDataset, pool_size: usize, rng: &mut impl Rng) -> Result<TripletPool> {
    dataset.validate()?;
    let mut persons = dataset.anchor_persons();
    persons.shuffle(rng);
    let share = pool_size / persons.len();
    let extra = pool_size % persons.len();
    let mut triplets = Vec::with_capacity(pool_size);
    for (rank, &person) in persons.iter().enumerate() {
        let count = share + usize::from(rank < extra);
        for _ in 0..count {
            triplets.push(sample_triplet(dataset, person, rng)?);
        }
    }
    triplets.shuffle(rng);
    Ok(TripletPool { triplets, generation: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn patch(v: f32) -> Tensor<f32> {
        Tensor::filled(&[1, 20, 20], v)
    }

    fn dataset(sizes: &[usize]) -> PatchDataset {
        let mut d = PatchDataset::new();
        for (p, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                d.push(&format!("p{p}"), patch(i as f32)).unwrap();
            }
        }
        d
    }

    #[test]
    fn forced_triplet() {
        let d = dataset(&[2, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let t = sample_triplet(&d, 0, &mut rng).unwrap();
            let mut ap = [t.anchor.index, t.positive.index];
            ap.sort();
            assert_eq!(ap, [0, 1]);
            assert_eq!(t.negative, PatchRef { person: 1, index: 0 });
        }
    }

    #[test]
    fn single_patch_anchor_is_an_error_naming_the_person() {
        let d = dataset(&[2, 1]);
        let err = sample_triplet(&d, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(err.to_string().contains("p1"), "{err}");
    }

    #[test]
    fn ten_thousand_draws_are_well_formed() {
        let d = dataset(&[3, 5, 2, 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..10_000 {
            let t = sample_triplet(&d, i % 4, &mut rng).unwrap();
            assert!(t.is_well_formed(), "{t:?}");
            assert!(t.negative.index < d.patches_of(t.negative.person).len());
        }
    }

    #[test]
    fn pool_is_balanced() {
        let d = dataset(&[3, 5, 1, 7]);
        let pool = build_pool(&d, 20, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(pool.triplets.len(), 20);
        let mut counts = [0usize; 4];
        for t in &pool.triplets {
            counts[t.anchor.person] += 1;
        }
        // person 2 cannot anchor; 20 over 3 persons
        assert_eq!(counts[2], 0);
        let anchored: Vec<usize> = [counts[0], counts[1], counts[3]].to_vec();
        assert!(anchored.iter().max().unwrap() - anchored.iter().min().unwrap() <= 1);
        assert_eq!(anchored.iter().sum::<usize>(), 20);
    }

    #[test]
    fn one_person_is_too_small() {
        let d = dataset(&[4]);
        assert!(matches!(build_pool(&d, 4, &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::Dataset(_))));
    }
}
